#include "wcam/protocol.hpp"

#include <bit>
#include <algorithm>
#include <cstring>
#include <limits>

#include <json.hpp>

namespace wcam::protocol {

using nlohmann::json;

namespace {

void put_f32_le(std::string& out, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((bits >> shift) & 0xffu));
}

float get_f32_le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

std::size_t split_header(std::string_view payload) {
  const auto newline = payload.find('\n');
  if (newline == std::string_view::npos)
    throw ProtocolError(ProtocolError::Code::MalformedFraming, "request has no header terminator");
  return newline;
}

std::size_t get_size(const json& header, const char* key) {
  const auto it = header.find(key);
  if (it == header.end() || !it->is_number_unsigned())
    throw ProtocolError(ProtocolError::Code::MalformedFraming,
                        std::string("header field '") + key + "' missing or not a non-negative integer");
  return it->get<std::size_t>();
}

json parse_body(std::string_view body) {
  json parsed = json::parse(body.begin(), body.end(), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object())
    throw ScorerError(ScorerError::Kind::Protocol, "response is not a JSON object");
  if (const auto err = parsed.find("error"); err != parsed.end()) {
    std::string message = "backend error";
    if (err->is_object()) message = err->value("code", std::string("error")) + ": " + err->value("message", std::string());
    throw ScorerError(ScorerError::Kind::Protocol, message);
  }
  const auto scores = parsed.find("scores");
  if (scores == parsed.end() || !scores->is_array())
    throw ScorerError(ScorerError::Kind::Protocol, "response has no 'scores' array");
  return *scores;
}

double as_score(const json& value) {
  if (value.is_number()) return value.get<double>();
  // Non-finite floats have no JSON literal; null is how they arrive.
  if (value.is_null()) return std::numeric_limits<double>::quiet_NaN();
  throw ScorerError(ScorerError::Kind::Protocol, "score is not a number");
}

}  // namespace

std::string encode_request(std::span<const Image> images, int target_class, ScoreKind kind, bool scores_all) {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 0;
  if (!images.empty()) {
    check_consistent(images.front());
    rows = static_cast<std::size_t>(images.front().rows());
    cols = static_cast<std::size_t>(images.front().cols());
    channels = images.front().channel_count();
  }
  for (const auto& image : images) {
    check_consistent(image);
    if (static_cast<std::size_t>(image.rows()) != rows || static_cast<std::size_t>(image.cols()) != cols ||
        image.channel_count() != channels)
      throw ShapeError("encode_request: images in a batch must share one shape");
  }

  const json header = {{"batch", images.size()},   {"channels", channels},
                       {"dtype", "f32"},           {"height", rows},
                       {"layout", "CHW"},          {"score_kind", to_string(kind)},
                       {"scores_all", scores_all}, {"target_class", target_class},
                       {"version", kVersion},      {"width", cols}};
  std::string out = header.dump();
  out.push_back('\n');
  out.reserve(out.size() + images.size() * channels * rows * cols * 4);
  for (const auto& image : images)
    for (const auto& plane : image.channels)
      for (Eigen::Index r = 0; r < plane.rows(); ++r)
        for (Eigen::Index c = 0; c < plane.cols(); ++c) put_f32_le(out, static_cast<float>(plane(r, c)));
  return out;
}

RequestHeader decode_request_header(std::string_view payload) try {
  const std::size_t newline = split_header(payload);
  const json header = json::parse(payload.begin(), payload.begin() + static_cast<std::ptrdiff_t>(newline),
                                  nullptr, false);
  if (header.is_discarded() || !header.is_object())
    throw ProtocolError(ProtocolError::Code::MalformedFraming, "request header is not a JSON object");
  if (header.value("dtype", std::string()) != "f32")
    throw ProtocolError(ProtocolError::Code::MalformedFraming, "dtype must be f32");
  if (header.value("layout", std::string()) != "CHW")
    throw ProtocolError(ProtocolError::Code::MalformedFraming, "layout must be CHW");

  RequestHeader out;
  out.batch = get_size(header, "batch");
  out.height = get_size(header, "height");
  out.width = get_size(header, "width");
  out.channels = get_size(header, "channels");
  const auto target = header.find("target_class");
  if (target == header.end() || !target->is_number_integer())
    throw ProtocolError(ProtocolError::Code::MalformedFraming, "header field 'target_class' missing");
  out.target_class = target->get<int>();
  try {
    out.score_kind = parse_score_kind(header.value("score_kind", std::string("probability")));
  } catch (const InvalidParam& e) {
    throw ProtocolError(ProtocolError::Code::MalformedFraming, e.what());
  }
  out.scores_all = header.value("scores_all", false);
  return out;
} catch (const json::exception& e) {
  throw ProtocolError(ProtocolError::Code::MalformedFraming, std::string("bad request header: ") + e.what());
}

Request decode_request(std::string_view payload) {
  Request request;
  request.header = decode_request_header(payload);
  const auto& h = request.header;
  const std::size_t offset = split_header(payload) + 1;
  const std::size_t expected = h.batch * h.channels * h.height * h.width * 4;
  if (payload.size() - offset != expected)
    throw ProtocolError(ProtocolError::Code::ShapeMismatch,
                        "tensor has " + std::to_string(payload.size() - offset) + " bytes, header implies " +
                            std::to_string(expected));
  if (h.batch > 0 && (h.channels == 0 || h.height == 0 || h.width == 0))
    throw ProtocolError(ProtocolError::Code::ShapeMismatch, "empty image dimensions");

  const auto* p = reinterpret_cast<const unsigned char*>(payload.data() + offset);
  request.images.reserve(h.batch);
  for (std::size_t b = 0; b < h.batch; ++b) {
    Image image(static_cast<Eigen::Index>(h.height), static_cast<Eigen::Index>(h.width), h.channels);
    for (auto& plane : image.channels)
      for (Eigen::Index r = 0; r < plane.rows(); ++r)
        for (Eigen::Index c = 0; c < plane.cols(); ++c, p += 4) plane(r, c) = get_f32_le(p);
    request.images.push_back(std::move(image));
  }
  return request;
}

std::string encode_scores(std::span<const double> scores) {
  return json{{"scores", std::vector<double>(scores.begin(), scores.end())}}.dump();
}

std::string encode_all_scores(const std::vector<std::vector<double>>& scores) {
  return json{{"scores", scores}}.dump();
}

std::string encode_error(std::string_view code, std::string_view message) {
  return json{{"error", {{"code", code}, {"message", message}}}}.dump();
}

std::vector<double> decode_scores(std::string_view body, std::size_t expected) {
  const json scores = parse_body(body);
  if (scores.size() != expected)
    throw ScorerError(ScorerError::Kind::Protocol, "expected " + std::to_string(expected) + " scores, got " +
                                                       std::to_string(scores.size()));
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& value : scores) out.push_back(as_score(value));
  return out;
}

std::vector<std::vector<double>> decode_all_scores(std::string_view body, std::size_t expected) {
  const json scores = parse_body(body);
  if (scores.size() != expected)
    throw ScorerError(ScorerError::Kind::Protocol, "expected " + std::to_string(expected) + " score rows, got " +
                                                       std::to_string(scores.size()));
  std::vector<std::vector<double>> out;
  out.reserve(expected);
  for (const auto& row : scores) {
    if (!row.is_array()) throw ScorerError(ScorerError::Kind::Protocol, "score row is not an array");
    std::vector<double> values;
    for (const auto& value : row) values.push_back(as_score(value));
    out.push_back(std::move(values));
  }
  return out;
}

std::string frame(std::string_view payload) {
  if (payload.size() > 0xffffffffu) throw InvalidParam("payload too large for a frame");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(payload.size() + 4);
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((n >> shift) & 0xffu));
  out.append(payload);
  return out;
}

std::uint32_t read_frame_length(std::span<const unsigned char, 4> prefix) {
  return (static_cast<std::uint32_t>(prefix[0]) << 24) | (static_cast<std::uint32_t>(prefix[1]) << 16) |
         (static_cast<std::uint32_t>(prefix[2]) << 8) | static_cast<std::uint32_t>(prefix[3]);
}

Reply handle_score_request(Scorer& scorer, std::string_view payload) {
  Request request;
  try {
    request = decode_request(payload);
  } catch (const ProtocolError& e) {
    return {e.code() == ProtocolError::Code::ShapeMismatch ? 422 : 400, encode_error(e.code_name(), e.what())};
  }
  try {
    std::string body;
    std::span<const Image> images(request.images);
    if (request.header.scores_all) {
      std::vector<std::vector<double>> all;
      for (std::size_t start = 0; start < images.size(); start += scorer.max_batch()) {
        const auto chunk = images.subspan(start, std::min(scorer.max_batch(), images.size() - start));
        auto part = score_batch_all(scorer, chunk);
        all.insert(all.end(), part.begin(), part.end());
      }
      body = encode_all_scores(all);
    } else {
      std::vector<double> scores;
      for (std::size_t start = 0; start < images.size(); start += scorer.max_batch()) {
        const auto chunk = images.subspan(start, std::min(scorer.max_batch(), images.size() - start));
        auto part = score_batch(scorer, chunk, request.header.target_class);
        scores.insert(scores.end(), part.begin(), part.end());
      }
      body = encode_scores(scores);
    }
    return {200, body};
  } catch (const std::exception& e) {
    return {500, encode_error("inference_failure", e.what())};
  }
}

}  // namespace wcam::protocol
