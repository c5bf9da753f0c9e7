// wcam: wavelet-domain attribution from the command line.
//
// Exit codes: 0 success, 2 configuration error, 3 scorer error, 4 I/O error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wcam/analysis.hpp"
#include "wcam/io.hpp"
#include "wcam/metrics.hpp"
#include "wcam/pipeline.hpp"
#include "wcam/protocol.hpp"
#include "wcam/remote.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

enum ExitCode { kOk = 0, kConfig = 2, kScorer = 3, kIo = 4 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::vector<std::string> images;
  std::string scorer;
  int target_class = 0;
  long grid = 28;
  long designs = 8;
  int levels = 2;
  std::string wavelet = "haar";
  std::string sampler = "sobol";
  std::uint64_t seed = 0;
  std::string out = ".";
  std::size_t batch = 32;
  int size = 224;
  std::string score_kind = "probability";
  std::string mask_mode = "continuous";
  bool no_clamp = false;
  unsigned threads = 0;
  std::string map_path;
};

void add_common(CLI::App* cmd, Common& c, bool many_images = false) {
  if (many_images)
    cmd->add_option("--image", c.images, "Input images (PNG/JPEG)")->required();
  else
    cmd->add_option("--image", c.images, "Input image (PNG/JPEG)")->required()->expected(1);
  cmd->add_option("--scorer", c.scorer,
                  "http://host:port, synthetic:<model>[:k=v,...] or subprocess:<command> (default: $WCAM_SCORER_URL)");
  cmd->add_option("--class", c.target_class, "Target class index")->required();
  cmd->add_option("--grid", c.grid, "Mask grid size g")->capture_default_str();
  cmd->add_option("--designs", c.designs, "Number of designs N")->capture_default_str();
  cmd->add_option("--levels", c.levels, "Wavelet decomposition levels L")->capture_default_str();
  cmd->add_option("--wavelet", c.wavelet, "haar or d4")->capture_default_str();
  cmd->add_option("--sampler", c.sampler, "sobol, halton, lhs or montecarlo")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Sampler seed")->capture_default_str();
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--batch", c.batch, "Images per scorer call")->capture_default_str();
  cmd->add_option("--size", c.size, "Resize side before attribution; 0 keeps the native size")->capture_default_str();
  cmd->add_option("--score-kind", c.score_kind, "probability or logit")->capture_default_str();
  cmd->add_option("--mask-mode", c.mask_mode, "continuous or binary")->capture_default_str();
  cmd->add_flag("--no-clamp", c.no_clamp, "Do not clamp perturbed images to [0, 1]");
  cmd->add_option("--threads", c.threads, "Scoring threads, 0 = hardware")->capture_default_str();
}

wcam::WcamConfig make_config(const Common& c) {
  wcam::WcamConfig config;
  try {
    config.grid_size = c.grid;
    config.n_design = c.designs;
    config.wavelet.family = wcam::parse_wavelet_family(c.wavelet);
    config.wavelet.levels = c.levels;
    config.sampler.sampler = wcam::parse_sampler(c.sampler);
    config.sampler.seed = c.seed;
    config.batch_size = c.batch;
    config.score_kind = wcam::parse_score_kind(c.score_kind);
    config.clamp_output = !c.no_clamp;
    config.mask_mode = wcam::parse_mask_mode(c.mask_mode);
    config.threads = c.threads;
    wcam::validate_config(config);
  } catch (const wcam::Error& e) {
    throw ConfigError(e.what());
  }
  if (c.size < 0) throw ConfigError("size must be non-negative");
  if (c.size > 0 && c.size % c.grid != 0) throw ConfigError("size must be divisible by grid_size");
  return config;
}

std::string scorer_spec(const Common& c) {
  if (!c.scorer.empty()) return c.scorer;
  if (const char* env = std::getenv("WCAM_SCORER_URL"); env && *env) return env;
  throw ConfigError("no scorer given: pass --scorer or set WCAM_SCORER_URL");
}

std::unique_ptr<wcam::Scorer> open_scorer(const Common& c, const wcam::WcamConfig& config, const wcam::Image& image) {
  wcam::ScorerContext context;
  context.rows = image.rows();
  context.cols = image.cols();
  context.channels = image.channel_count();
  context.wavelet = config.wavelet;
  context.remote.max_batch = config.batch_size;
  context.remote.score_kind = config.score_kind;
  try {
    return wcam::make_scorer(scorer_spec(c), context);
  } catch (const wcam::InvalidParam& e) {
    throw ConfigError(e.what());
  } catch (const wcam::ShapeError& e) {
    throw ConfigError(e.what());
  }
}

json config_json(const wcam::WcamConfig& config) {
  return {{"grid_size", config.grid_size},
          {"n_design", config.n_design},
          {"sampler", wcam::to_string(config.sampler.sampler)},
          {"seed", config.sampler.seed},
          {"wavelet", wcam::to_string(config.wavelet.family)},
          {"levels", config.wavelet.levels},
          {"boundary", "periodic"},
          {"batch_size", config.batch_size},
          {"score_kind", wcam::to_string(config.score_kind)},
          {"clamp_output", config.clamp_output},
          {"mask_mode", wcam::to_string(config.mask_mode)}};
}

/// Reproducibility record. Everything but the wall time, which only goes into
/// manifest.json, is a pure function of the inputs.
json manifest(const std::string& command, const Common& c, const wcam::WcamConfig& config, long n_forwards) {
  return {{"schema", "wcam.manifest/1"},
          {"tool_version", kToolVersion},
          {"command", command},
          {"config", config_json(config)},
          {"images", c.images},
          {"resize", c.size == 0 ? json(nullptr) : json({{"side", c.size}, {"interpolation", "bilinear"}})},
          {"scorer", scorer_spec(c)},
          {"target_class", c.target_class},
          {"n_forwards", n_forwards},
          {"output_dir", c.out}};
}

// Copy embedded in CSV, PNG and JSON outputs. The output directory is left
// out so that the same run written elsewhere yields identical bytes.
json embedded(json m) {
  m.erase("output_dir");
  return m;
}

std::string comment(const json& m) { return embedded(m).dump(); }

void write_manifest(const json& m, const Common& c, double seconds) {
  json full = m;
  full["wall_time_seconds"] = seconds;
  wcam::io::write_text((fs::path(c.out) / "manifest.json").string(), full.dump(2) + "\n");
}

void ensure_out(const Common& c) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw wcam::IoError("cannot create output directory '" + c.out + "': " + ec.message());
}

std::string out_path(const Common& c, const std::string& name) { return (fs::path(c.out) / name).string(); }

wcam::Image load(const std::string& path, const Common& c) { return wcam::io::load_image(path, c.size); }

int cell_pixels(Eigen::Index side) { return static_cast<int>(std::max<Eigen::Index>(1, 224 / side)); }

// The attribution map comes from --map (a wcam.csv) or a fresh WCAM run.
struct MapSource {
  wcam::Grid total;
  long n_forwards = 0;
};

MapSource obtain_map(const Common& c, const wcam::WcamConfig& config, const wcam::Image& image, wcam::Scorer& scorer) {
  if (!c.map_path.empty()) {
    MapSource src{wcam::io::read_grid_csv(c.map_path), 0};
    if (src.total.rows() != config.grid_size || src.total.cols() != config.grid_size)
      throw ConfigError("map '" + c.map_path + "' is not " + std::to_string(config.grid_size) + "x" +
                        std::to_string(config.grid_size));
    return src;
  }
  const auto map = wcam::compute_wcam(image, c.target_class, scorer, config);
  if (map.degenerate) std::cerr << "warning: scorer output has no variance; all indices are zero\n";
  return {map.total, map.n_forwards};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int cmd_attribute(const Common& c) {
  const auto start = std::chrono::steady_clock::now();
  const auto config = make_config(c);
  const auto image = load(c.images.front(), c);
  auto scorer = open_scorer(c, config, image);
  ensure_out(c);
  const auto map = wcam::compute_wcam(image, c.target_class, *scorer, config);
  if (map.degenerate) std::cerr << "warning: scorer output has no variance; all indices are zero\n";
  const auto spatial = wcam::spatial_project(map);

  json m = manifest("attribute", c, config, map.n_forwards);
  m["degenerate"] = map.degenerate;
  const std::string line = comment(m);
  const std::map<std::string, std::string> text{{"wcam-manifest", line}};
  wcam::io::write_grid_csv(out_path(c, "wcam.csv"), map.total, line);
  wcam::io::write_png(out_path(c, "wcam.png"), wcam::io::render_heatmap(map.total, cell_pixels(map.grid_size()), config.wavelet),
                      text);
  wcam::io::write_grid_csv(out_path(c, "spatial.csv"), spatial, line);
  wcam::io::write_png(out_path(c, "spatial.png"), wcam::io::render_heatmap(spatial, cell_pixels(spatial.rows())), text);
  write_manifest(m, c, seconds_since(start));
  std::cout << "n_forwards " << map.n_forwards << "\n";
  return kOk;
}

struct MetricArgs {
  std::string feature_space = "wavelet";
  long steps = 0;
  long subset_size = 0;
  long subsets = 200;
  std::uint64_t metric_seed = 0;
};

std::string curve_csv(const wcam::CurveResult& curve, const std::string& line) {
  std::string out = "# " + line + "\nstep,count,score\n";
  for (Eigen::Index t = 0; t < curve.scores.size(); ++t)
    out += std::to_string(t) + "," + std::to_string(curve.counts[static_cast<std::size_t>(t)]) + "," +
           wcam::io::format_double(curve.scores(t)) + "\n";
  return out;
}

int cmd_metrics(const Common& c, const MetricArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  const auto config = make_config(c);
  const auto image = load(c.images.front(), c);
  auto scorer = open_scorer(c, config, image);
  ensure_out(c);
  const auto src = obtain_map(c, config, image, *scorer);

  wcam::AttributionGrid attr;
  wcam::MetricOptions options;
  try {
    attr.importance = src.total;
    attr.feature_space = wcam::parse_feature_space(a.feature_space);
    attr.wavelet = config.wavelet;
    options.steps = a.steps;
    options.clamp = config.clamp_output;
    options.subset_size = a.subset_size;
    options.n_subsets = a.subsets;
    options.seed = a.metric_seed;
  } catch (const wcam::InvalidParam& e) {
    throw ConfigError(e.what());
  }
  const auto del = wcam::deletion(image, attr, *scorer, c.target_class, options);
  const auto ins = wcam::insertion(image, attr, *scorer, c.target_class, options);
  const auto mu = wcam::mu_fidelity(image, attr, *scorer, c.target_class, options);

  json m = manifest("metrics", c, config, src.n_forwards);
  m["map"] = c.map_path.empty() ? json(nullptr) : json(c.map_path);
  m["metrics"] = {{"feature_space", a.feature_space},
                  {"steps", del.scores.size() - 1},
                  {"subset_size", a.subset_size == 0 ? std::max<Eigen::Index>(1, attr.features() / 8) : a.subset_size},
                  {"n_subsets", a.subsets},
                  {"seed", a.metric_seed},
                  {"baseline", attr.baseline}};
  const std::string line = comment(m);
  wcam::io::write_text(out_path(c, "deletion.csv"), curve_csv(del, line));
  wcam::io::write_text(out_path(c, "insertion.csv"), curve_csv(ins, line));
  json mu_json = {{"schema", "wcam.mufidelity/1"},
                  {"correlation", mu.correlation},
                  {"degenerate", mu.degenerate},
                  {"deletion_auc", del.auc},
                  {"insertion_auc", ins.auc},
                  {"manifest", embedded(m)}};
  wcam::io::write_text(out_path(c, "mufidelity.json"), mu_json.dump(2) + "\n");
  write_manifest(m, c, seconds_since(start));
  std::cout << "deletion_auc " << wcam::io::format_double(del.auc) << "\ninsertion_auc "
            << wcam::io::format_double(ins.auc) << "\nmu_fidelity " << wcam::io::format_double(mu.correlation) << "\n";
  return kOk;
}

int cmd_embed(const Common& c, const std::string& norm_name) {
  const auto start = std::chrono::steady_clock::now();
  const auto config = make_config(c);
  wcam::EmbeddingNorm norm;
  try {
    norm = wcam::parse_embedding_norm(norm_name);
  } catch (const wcam::InvalidParam& e) {
    throw ConfigError(e.what());
  }
  const auto image = load(c.images.front(), c);
  auto scorer = open_scorer(c, config, image);
  ensure_out(c);
  const auto src = obtain_map(c, config, image, *scorer);
  const auto embedding = wcam::scale_embed(src.total, config.wavelet, norm);
  const auto curve = wcam::frequency_curve(embedding);

  json m = manifest("embed", c, config, src.n_forwards);
  m["map"] = c.map_path.empty() ? json(nullptr) : json(c.map_path);
  json entries = json::array();
  for (std::size_t s = 0; s < embedding.labels.size(); ++s)
    entries.push_back({{"subband", embedding.labels[s]}, {"value", embedding.z(static_cast<Eigen::Index>(s))}});
  json out = {{"schema", "wcam.embedding/1"},
              {"normalization", wcam::to_string(norm)},
              {"floored_cells", embedding.floored},
              {"entries", entries},
              {"manifest", embedded(m)}};
  wcam::io::write_text(out_path(c, "embedding.json"), out.dump(2) + "\n");

  std::string csv = "# " + comment(m) + "\nsubband,importance,cumulative\n";
  for (std::size_t s = 0; s < curve.labels.size(); ++s)
    csv += curve.labels[s] + "," + wcam::io::format_double(curve.importance(static_cast<Eigen::Index>(s))) + "," +
           wcam::io::format_double(curve.cumulative(static_cast<Eigen::Index>(s))) + "\n";
  wcam::io::write_text(out_path(c, "curve.csv"), csv);
  if (curve.degenerate) std::cerr << "warning: embedding has no positive mass; curve is undefined\n";
  write_manifest(m, c, seconds_since(start));
  return kOk;
}

int cmd_reconstruct(const Common& c, const std::vector<long>& ks, bool skip_minimal) {
  const auto start = std::chrono::steady_clock::now();
  const auto config = make_config(c);
  const auto image = load(c.images.front(), c);
  auto scorer = open_scorer(c, config, image);
  ensure_out(c);
  const auto src = obtain_map(c, config, image, *scorer);
  const long K = config.grid_size * config.grid_size;
  for (const long k : ks)
    if (k < 0 || k > K) throw ConfigError("k must be in [0, " + std::to_string(K) + "]");

  json m = manifest("reconstruct", c, config, src.n_forwards);
  m["map"] = c.map_path.empty() ? json(nullptr) : json(c.map_path);
  const std::map<std::string, std::string> text{{"wcam-manifest", comment(m)}};
  for (const long k : ks) {
    char name[32];
    std::snprintf(name, sizeof name, "topk_%03ld.png", k);
    wcam::io::write_png(out_path(c, name), wcam::io::to_rgb8(wcam::reconstruct_topk(image, src.total, config.wavelet, k)),
                        text);
  }
  if (!skip_minimal) {
    const auto minimal = wcam::minimal_image(image, src.total, config.wavelet, *scorer, c.target_class);
    json out = {{"schema", "wcam.minimal/1"},
                {"outcome", minimal.sufficient() ? "sufficient" : "never_sufficient"},
                {"k", minimal.sufficient() ? json(minimal.k) : json(nullptr)},
                {"cells", K},
                {"evaluated", minimal.evaluated},
                {"manifest", embedded(m)}};
    if (minimal.sufficient()) {
      out["image"] = "minimal.png";
      wcam::io::write_png(out_path(c, "minimal.png"), wcam::io::to_rgb8(minimal.image), text);
    }
    wcam::io::write_text(out_path(c, "minimal.json"), out.dump(2) + "\n");
  }
  write_manifest(m, c, seconds_since(start));
  return kOk;
}

int cmd_consistency(const Common& c, std::size_t repeats, const std::string& norm_name) {
  const auto start = std::chrono::steady_clock::now();
  const auto config = make_config(c);
  wcam::EmbeddingNorm norm;
  try {
    norm = wcam::parse_embedding_norm(norm_name);
  } catch (const wcam::InvalidParam& e) {
    throw ConfigError(e.what());
  }
  if (c.images.size() < 2) throw ConfigError("consistency needs at least two images");
  if (repeats < 2) throw ConfigError("repeats must be at least 2");
  std::vector<wcam::Image> images;
  for (const auto& path : c.images) images.push_back(load(path, c));
  auto scorer = open_scorer(c, config, images.front());
  ensure_out(c);

  // Image i uses seed + i so that the batch spread includes sampling noise,
  // like the baseline it is compared with.
  std::vector<Eigen::VectorXd> embeddings;
  long forwards = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    wcam::WcamConfig run = config;
    run.sampler.seed = config.sampler.seed + i;
    const auto map = wcam::compute_wcam(images[i], c.target_class, *scorer, run);
    forwards += map.n_forwards;
    embeddings.push_back(wcam::scale_embed(map, norm).z);
  }
  wcam::WcamConfig noise_config = config;
  noise_config.sampler.seed = config.sampler.seed + images.size();
  const auto noise = wcam::noise_baseline(images.front(), c.target_class, *scorer, noise_config, repeats, norm);
  forwards += static_cast<long>(repeats) * config.n_forwards();
  const auto report = wcam::batch_consistency(embeddings, noise);

  json m = manifest("consistency", c, config, forwards);
  m["repeats"] = repeats;
  m["normalization"] = wcam::to_string(norm);
  std::string csv = "# " + comment(m) + "\ni,j,distance\n";
  std::size_t p = 0;
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    for (std::size_t j = i + 1; j < embeddings.size(); ++j, ++p)
      csv += std::to_string(i) + "," + std::to_string(j) + "," + wcam::io::format_double(report.distances[p]) + "\n";
  wcam::io::write_text(out_path(c, "distances.csv"), csv);
  json out = {{"schema", "wcam.noise_baseline/1"},
              {"repeats", repeats},
              {"noise_mean", report.noise_mean},
              {"noise_sd", report.noise_sd},
              {"noise_ci95", {report.noise_ci_low, report.noise_ci_high}},
              {"batch_mean", report.mean_distance},
              {"batch_interval95", {report.batch_interval_low, report.batch_interval_high}},
              {"batch_within_interval",
               report.mean_distance >= report.batch_interval_low && report.mean_distance <= report.batch_interval_high},
              {"permutation", {{"p_value", report.permutation_p_value}, {"permutations", report.permutations}}},
              {"welch", {{"t", report.test.t}, {"df", report.test.df}, {"p_value", report.test.p_value}}},
              {"manifest", embedded(m)}};
  wcam::io::write_text(out_path(c, "noise_baseline.json"), out.dump(2) + "\n");
  write_manifest(m, c, seconds_since(start));
  std::cout << "batch_mean " << wcam::io::format_double(report.mean_distance) << "\nnoise_mean "
            << wcam::io::format_double(report.noise_mean) << "\np_value "
            << wcam::io::format_double(report.permutation_p_value) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelet-domain attribution with total Sobol indices"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common common;
  auto* attribute = app.add_subcommand("attribute", "Compute the attribution map of an image");
  add_common(attribute, common);

  MetricArgs metric_args;
  auto* metrics = app.add_subcommand("metrics", "Deletion, insertion and mu-fidelity of an attribution");
  add_common(metrics, common);
  metrics->add_option("--map", common.map_path, "Attribution CSV (default: compute one)");
  metrics->add_option("--feature-space", metric_args.feature_space, "wavelet or pixel")->capture_default_str();
  metrics->add_option("--steps", metric_args.steps, "Curve steps, 0 = one feature per step")->capture_default_str();
  metrics->add_option("--subset-size", metric_args.subset_size, "mu-fidelity subset size, 0 = K/8")->capture_default_str();
  metrics->add_option("--subsets", metric_args.subsets, "mu-fidelity subset count")->capture_default_str();
  metrics->add_option("--metric-seed", metric_args.metric_seed, "mu-fidelity subset seed")->capture_default_str();

  std::string norm = "raw-sum";
  auto* embed = app.add_subcommand("embed", "Scale embedding and cumulative frequency curve");
  add_common(embed, common);
  embed->add_option("--map", common.map_path, "Attribution CSV (default: compute one)");
  embed->add_option("--norm", norm, "raw-sum or mean-per-cell")->capture_default_str();

  std::vector<long> ks;
  bool skip_minimal = false;
  auto* reconstruct = app.add_subcommand("reconstruct", "Top-k reconstructions and the minimal image");
  add_common(reconstruct, common);
  reconstruct->add_option("--map", common.map_path, "Attribution CSV (default: compute one)");
  reconstruct->add_option("--k", ks, "Cell counts to reconstruct")->required();
  reconstruct->add_flag("--no-minimal", skip_minimal, "Skip the minimal-image search");

  std::size_t repeats = 20;
  auto* consistency = app.add_subcommand("consistency", "Embedding distances against a sampling-noise baseline");
  add_common(consistency, common, true);
  consistency->add_option("--repeats", repeats, "Runs for the noise baseline")->capture_default_str();
  consistency->add_option("--norm", norm, "raw-sum or mean-per-cell")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (attribute->parsed()) return cmd_attribute(common);
    if (metrics->parsed()) return cmd_metrics(common, metric_args);
    if (embed->parsed()) return cmd_embed(common, norm);
    if (reconstruct->parsed()) return cmd_reconstruct(common, ks, skip_minimal);
    if (consistency->parsed()) return cmd_consistency(common, repeats, norm);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const wcam::ScorerError& e) {
    std::cerr << "scorer error";
    if (e.batch_index() >= 0) std::cerr << " (batch " << e.batch_index() << ")";
    std::cerr << ": " << e.what() << "\n";
    return kScorer;
  } catch (const wcam::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const wcam::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kConfig;
}
