#ifndef WCAM_PROTOCOL_HPP
#define WCAM_PROTOCOL_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wcam/image.hpp"
#include "wcam/scorer.hpp"

namespace wcam::protocol {

// Scoring request payload, shared by the HTTP and stdio transports:
//
//   <header JSON, compact, keys sorted> '\n' <tensor bytes>
//
// The header carries batch, height, width, channels, dtype ("f32"), layout
// ("CHW"), target_class, score_kind, scores_all and version. The tensor is
// batch x channels x height x width IEEE-754 float32 values, little-endian,
// image-major then channel, row, column.
//
// Response body: {"scores": [s0, s1, ...]}, or with scores_all set
// {"scores": [[c0, c1, ...], ...]}. Errors: {"error": {"code", "message"}}.
//
// HTTP: POST <endpoint>/score, Content-Type application/octet-stream, JSON
// response. Stdio: every request and response is a frame made of a 4-byte
// big-endian length followed by that many payload bytes.

inline constexpr int kVersion = 1;
inline constexpr const char* kContentType = "application/octet-stream";

struct RequestHeader {
  std::size_t batch = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  int target_class = 0;
  ScoreKind score_kind = ScoreKind::Probability;
  bool scores_all = false;

  bool operator==(const RequestHeader&) const = default;
};

struct Request {
  RequestHeader header;
  std::vector<Image> images;
};

/// Thrown by the decoders; `code` is the machine-readable error code.
class ProtocolError : public ScorerError {
 public:
  enum class Code { MalformedFraming, ShapeMismatch };

  ProtocolError(Code code, const std::string& what)
      : ScorerError(Kind::Protocol, what), code_(code) {}

  Code code() const noexcept { return code_; }
  const char* code_name() const noexcept {
    return code_ == Code::MalformedFraming ? "malformed_framing" : "shape_mismatch";
  }

 private:
  Code code_;
};

std::string encode_request(std::span<const Image> images, int target_class, ScoreKind kind,
                           bool scores_all = false);

Request decode_request(std::string_view payload);

/// Header only; does not touch the tensor bytes.
RequestHeader decode_request_header(std::string_view payload);

std::string encode_scores(std::span<const double> scores);
std::string encode_all_scores(const std::vector<std::vector<double>>& scores);
std::string encode_error(std::string_view code, std::string_view message);

/// Parses a response body; throws ScorerError(Protocol) on an error reply,
/// malformed JSON or a count different from `expected`.
std::vector<double> decode_scores(std::string_view body, std::size_t expected);
std::vector<std::vector<double>> decode_all_scores(std::string_view body, std::size_t expected);

/// 4-byte big-endian length prefix followed by the payload.
std::string frame(std::string_view payload);
std::uint32_t read_frame_length(std::span<const unsigned char, 4> prefix);

/// Server side of the protocol: decode, score, encode. The HTTP status is
/// 200 on success, 400 for malformed framing, 422 for shape mismatch and
/// 500 for scoring failures; the body always follows the response schema.
struct Reply {
  int status = 200;
  std::string body;
};

Reply handle_score_request(Scorer& scorer, std::string_view payload);

}  // namespace wcam::protocol

#endif  // WCAM_PROTOCOL_HPP
