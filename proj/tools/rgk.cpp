// rgk: command-line front end for region partitioning, regional attention,
// cost modelling and layout-fidelity metrics.
//
// Exit codes: 0 success, 1 I/O or usage error, 2 validation or data error.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rgk/rgk.hpp"

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

rgk::TokenGrid parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  try {
    std::size_t used = 0;
    if (x == std::string::npos) {
      const auto side = std::stoul(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return rgk::TokenGrid(side, side);
    }
    const auto h = std::stoul(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    const auto w = std::stoul(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument(text);
    return rgk::TokenGrid(h, w);
  } catch (const std::exception&) {
    throw UsageError("bad grid '" + text + "', expected HxW with positive integers");
  }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("RGK_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("RGK_SEED is not an unsigned integer: ") + env);
  }
  throw UsageError("this command needs --seed (or RGK_SEED)");
}

void emit(const std::string& bytes, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << bytes;
  } else {
    rgk::write_file_atomic(path, bytes);
  }
}

rgk::Layout load_layout_reporting(const std::string& path, bool lenient) {
  auto loaded = rgk::load_layout(path, !lenient);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
  return std::move(loaded.layout);
}

void warn_skipped(const rgk::RegionPartition& p) {
  for (int id : p.skipped_objects) {
    std::cerr << "warning: object " << id << " covers no token center on a " << p.grid.height()
              << "x" << p.grid.width() << " grid and is skipped\n";
  }
}

// ---------------------------------------------------------------------------

struct PartitionArgs {
  std::string layout;
  std::string grid = "16x16";
  std::string out;
  bool lenient = false;
};

int run_partition(const PartitionArgs& a) {
  const auto layout = load_layout_reporting(a.layout, a.lenient);
  const auto partition = rgk::reorganize(layout, parse_grid(a.grid));
  warn_skipped(partition);
  emit(rgk::to_canonical_json(rgk::partition_to_json(partition)), a.out);
  return 0;
}

struct AttendArgs {
  std::string layout;
  std::string grid = "16x16";
  std::size_t channels = 64;
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t text_dim = 64;
  std::size_t box_dim = 32;
  std::string mode = "full";
  std::optional<std::uint64_t> seed;
  std::string features;
  bool zero_init = false;
  std::string out;
  std::string diagnostics;
  bool lenient = false;
};

int run_attend(const AttendArgs& a) {
  const auto seed = resolve_seed(a.seed);
  const auto mode = rgk::parse_mode(a.mode);
  const auto layout = load_layout_reporting(a.layout, a.lenient);

  rgk::FeatureMap features;
  if (!a.features.empty()) {
    features = rgk::decode_features(rgk::read_file(a.features), a.features);
  } else {
    features = rgk::FeatureMap::random(parse_grid(a.grid), a.channels, rgk::mix_seed(seed, 1));
  }

  rgk::AttentionShape shape{features.values.cols(), a.dim, a.heads, a.text_dim, a.box_dim};
  rgk::AttentionState state;
  try {
    state = rgk::AttentionState::fresh(shape, seed);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!a.zero_init) state.randomize_output(rgk::mix_seed(seed, 2));

  warn_skipped(rgk::reorganize(layout, features.grid));
  const auto output = rgk::regional_forward(features, layout, state, mode);

  auto diag = rgk::diagnostics_to_json(output);
  diag["mode"] = rgk::mode_name(mode);
  diag["seed"] = seed;
  diag["zero_init"] = a.zero_init;
  diag["grid"] = {{"height", features.grid.height()}, {"width", features.grid.width()}};
  diag["shape"] = {{"channels", shape.channels}, {"dim", shape.dim}, {"heads", shape.heads},
                   {"text_dim", shape.text_dim}, {"box_dim", shape.box_dim}};

  if (a.out.empty()) throw UsageError("attend needs --out for the binary output features");
  rgk::write_file_atomic(a.out, rgk::encode_features(features.grid, output.values));
  emit(rgk::to_canonical_json(diag), a.diagnostics);
  return 0;
}

struct GenArgs {
  std::size_t count = 0;
  std::optional<std::uint64_t> seed;
  std::size_t min_objects = 1;
  std::size_t max_objects = 6;
  double overlap_bias = 0.3;
  std::string vocab;
  std::string out_dir = ".";
  int width = 512;
  int height = 512;
};

int run_gen_layouts(const GenArgs& a) {
  rgk::GeneratorOptions opts;
  opts.count = a.count;
  opts.seed = resolve_seed(a.seed);
  opts.min_objects = a.min_objects;
  opts.max_objects = a.max_objects;
  opts.overlap_bias = a.overlap_bias;
  opts.image_width = a.width;
  opts.image_height = a.height;

  std::vector<std::string> vocab = rgk::default_vocabulary();
  if (!a.vocab.empty()) {
    vocab.clear();
    std::istringstream lines(rgk::read_file(a.vocab));
    for (std::string line; std::getline(lines, line);) {
      if (!rgk::detail::trim(line).empty()) vocab.emplace_back(rgk::detail::trim(line));
    }
  }

  const auto layouts = rgk::generate_layouts(opts, vocab);
  if (layouts.empty()) return 0;
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw rgk::IoError("cannot create " + a.out_dir);
  for (std::size_t i = 0; i < layouts.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "layout_%05zu.json", i);
    rgk::write_file_atomic(fs::path(a.out_dir) / name,
                           rgk::to_canonical_json(rgk::layout_to_json(layouts[i])));
  }
  return 0;
}

struct CostArgs {
  bool default_sweep = false;
  std::string grid = "32x32";
  std::size_t channels = 640;
  std::size_t dim = 640;
  std::size_t heads = 8;
  std::size_t kv_channels = 0;
  std::size_t objects = 2;
  std::size_t tokens = 77;
  std::string variant = "all";
  std::size_t repetitions = 20;
  std::optional<std::uint64_t> seed;
  std::string out;
};

std::vector<rgk::AttentionConfig> cost_configs(const CostArgs& a) {
  if (a.default_sweep) return rgk::default_sweep_configs();
  std::vector<rgk::Variant> variants;
  if (a.variant == "all") {
    variants = {rgk::Variant::regional_cross, rgk::Variant::extended_self,
                rgk::Variant::per_object_cross};
  } else {
    variants = {rgk::parse_variant(a.variant)};
  }
  std::vector<rgk::AttentionConfig> configs;
  for (auto v : variants) {
    configs.push_back(rgk::canonical_config(v, parse_grid(a.grid), a.objects, a.tokens,
                                            a.channels, a.dim, a.heads, a.kv_channels));
  }
  return configs;
}

int run_cost(const CostArgs& a, bool timed) {
  const auto configs = cost_configs(a);
  const auto seed = timed ? resolve_seed(a.seed) : 0;
  if (timed && a.repetitions == 0) throw UsageError("--repetitions must be >= 1");
  const auto rows = rgk::sweep(configs, timed ? a.repetitions : 0, seed);
  std::ostringstream os;
  rgk::write_sweep_csv(os, rows);
  emit(os.str(), a.out);
  return 0;
}

struct EvalArgs {
  std::vector<std::string> layouts;
  std::string images;
  double lower = 0.05;
  double upper = 0.50;
  std::string backend = "mock";
  std::string embeddings;
  std::string masks;
  std::uint64_t seed = 0;
  std::string out;
  std::string csv;
  bool lenient = false;
};

rgk::ImageRaster load_image(const EvalArgs& a, const std::string& sample_id,
                            const rgk::Layout& layout) {
  if (!a.images.empty()) {
    const auto path = fs::path(a.images) / (sample_id + ".ppm");
    if (fs::exists(path)) {
      auto img = rgk::read_ppm(path);
      return {img.width, img.height, std::move(img.rgb), {}};
    }
  }
  return rgk::ImageRaster::external(layout.image_width, layout.image_height, sample_id);
}

int run_eval_scores(const EvalArgs& a, rgk::ScoreKind kind) {
  const rgk::FilterBounds bounds{a.lower, a.upper};
  bounds.validate();
  std::unique_ptr<rgk::EmbedderBackend> embedder;
  std::unique_ptr<rgk::SegmenterBackend> segmenter;
  if (a.backend == "mock") {
    embedder = std::make_unique<rgk::HashEmbedderBackend>(64, a.seed);
    segmenter = std::make_unique<rgk::RectangleSegmenter>();
  } else if (a.backend == "files") {
    if (kind == rgk::ScoreKind::crop_clip) {
      if (a.embeddings.empty()) throw UsageError("--backend files needs --embeddings");
      embedder = std::make_unique<rgk::FileEmbedderBackend>(rgk::load_embeddings(a.embeddings));
    } else {
      if (a.masks.empty()) throw UsageError("--backend files needs --masks");
      segmenter = std::make_unique<rgk::FileSegmenterBackend>(a.masks);
    }
  } else {
    throw UsageError("unknown backend '" + a.backend + "'");
  }

  std::vector<rgk::MetricReport> reports;
  for (const auto& path : a.layouts) {
    const auto layout = load_layout_reporting(path, a.lenient);
    const auto sample_id = fs::path(path).stem().string();
    const auto image = load_image(a, sample_id, layout);
    reports.push_back(kind == rgk::ScoreKind::crop_clip
                          ? rgk::crop_clip_score(image, layout, *embedder, bounds, sample_id)
                          : rgk::sam_iou_score(image, layout, *segmenter, bounds, sample_id));
  }
  auto merged = rgk::merge_reports(reports);
  merged.kind = kind;
  emit(rgk::to_canonical_json(rgk::report_to_json(merged)), a.out);
  if (!a.csv.empty()) rgk::write_file_atomic(a.csv, rgk::report_to_csv(merged));
  return 0;
}

int run_eval_stats(const EvalArgs& a) {
  std::vector<std::string> labels;
  rgk::json rows = rgk::json::array();
  std::map<std::string, std::size_t> histogram;
  for (const auto& path : a.layouts) {
    const auto layout = load_layout_reporting(path, a.lenient);
    const auto sample_id = fs::path(path).stem().string();
    for (const auto& obj : layout.objects) {
      const auto b = rgk::bucket_description(obj.text);
      labels.push_back(obj.text);
      const auto key = std::string(rgk::complexity_name(b.complexity)) + "/" +
                       std::string(rgk::length_bucket_name(b.length));
      ++histogram[key];
      rows.push_back({{"sample_id", sample_id},
                      {"object_id", obj.id},
                      {"label", obj.text},
                      {"words", b.words},
                      {"fog", b.fog},
                      {"complexity", rgk::complexity_name(b.complexity)},
                      {"length", rgk::length_bucket_name(b.length)}});
    }
  }
  const auto stats = rgk::text_stats(labels);
  rgk::json hist = rgk::json::object();
  for (auto c : {rgk::Complexity::easy, rgk::Complexity::medium, rgk::Complexity::hard}) {
    for (auto l : {rgk::LengthBucket::phrase, rgk::LengthBucket::short_sentence,
                   rgk::LengthBucket::long_sentence}) {
      const auto key = std::string(rgk::complexity_name(c)) + "/" +
                       std::string(rgk::length_bucket_name(l));
      hist[key] = histogram[key];
    }
  }
  const rgk::json out = {{"summary",
                          {{"average_length", stats.average_length},
                           {"gunning_fog", stats.gunning_fog},
                           {"unique_words_per_sample", stats.unique_words_per_sample},
                           {"samples", stats.samples}}},
                         {"buckets", hist},
                         {"labels", rows}};
  emit(rgk::to_canonical_json(out), a.out);
  return 0;
}

struct ReportArgs {
  std::vector<std::string> metrics;
  std::vector<std::string> costs;
  std::string out_samples;
  std::string out_costs;
};

int run_report(const ReportArgs& a) {
  if (a.metrics.empty() && a.costs.empty()) throw UsageError("report needs --metrics or --costs");

  // sample id -> kind -> (mean, kept)
  std::map<std::string, std::map<std::string, rgk::SampleScore>> joined;
  std::vector<std::string> kinds_seen;
  for (const auto& path : a.metrics) {
    const auto report = rgk::report_from_json(rgk::parse_json(rgk::read_file(path), path));
    const std::string kind(rgk::score_kind_name(report.kind));
    if (std::find(kinds_seen.begin(), kinds_seen.end(), kind) == kinds_seen.end()) {
      kinds_seen.push_back(kind);
    }
    for (const auto& s : report.samples) {
      auto& slot = joined[s.sample_id];
      if (slot.contains(kind)) {
        throw rgk::ValidationError("sample '" + s.sample_id + "' appears in more than one " +
                                   kind + " report");
      }
      slot[kind] = s;
    }
  }
  std::sort(kinds_seen.begin(), kinds_seen.end());

  if (!a.metrics.empty()) {
    std::ostringstream os;
    os << "sample_id";
    for (const auto& k : kinds_seen) os << ',' << k << ',' << k << "_kept";
    os << '\n';
    for (const auto& [sample, by_kind] : joined) {
      os << rgk::detail::csv_field(sample);
      for (const auto& k : kinds_seen) {
        const auto it = by_kind.find(k);
        os << ',';
        if (it != by_kind.end() && it->second.mean) os << rgk::format_sig9(*it->second.mean);
        os << ',';
        if (it != by_kind.end()) os << it->second.kept;
      }
      os << '\n';
    }
    emit(os.str(), a.out_samples);
  }

  if (!a.costs.empty()) {
    std::string merged = std::string(rgk::kSweepCsvHeader) + "\n";
    for (const auto& path : a.costs) {
      std::istringstream in(rgk::read_file(path));
      std::string line;
      if (!std::getline(in, line) || line != rgk::kSweepCsvHeader) {
        throw rgk::ValidationError(path + ": not a cost sweep CSV");
      }
      while (std::getline(in, line)) {
        if (!line.empty()) merged += line + "\n";
      }
    }
    emit(merged, a.out_costs);
  }
  return 0;
}

// ---------------------------------------------------------------------------

rgk::json describe_app(const CLI::App& app) {
  rgk::json options = rgk::json::array();
  for (const auto* opt : app.get_options()) {
    options.push_back({{"name", opt->get_name()},
                       {"description", opt->get_description()},
                       {"required", opt->get_required()},
                       {"default", opt->get_default_str()}});
  }
  rgk::json subs = rgk::json::array();
  for (const auto* sub : app.get_subcommands({})) subs.push_back(describe_app(*sub));
  return {{"name", app.get_name()},
          {"description", app.get_description()},
          {"options", options},
          {"subcommands", subs}};
}

void add_cost_options(CLI::App* cmd, CostArgs& a) {
  cmd->add_flag("--default-sweep", a.default_sweep, "Use the built-in sweep of grids and objects");
  cmd->add_option("--grid", a.grid, "Token grid HxW")->capture_default_str();
  cmd->add_option("--channels", a.channels, "Visual channels C")->capture_default_str();
  cmd->add_option("--dim", a.dim, "Attention width d")->capture_default_str();
  cmd->add_option("--heads", a.heads, "Attention heads")->capture_default_str();
  cmd->add_option("--kv-channels", a.kv_channels, "K/V input width (0: same as C)")
      ->capture_default_str();
  cmd->add_option("--objects", a.objects, "Objects in the canonical layout")->capture_default_str();
  cmd->add_option("--tokens", a.tokens, "Total text tokens T_total")->capture_default_str();
  cmd->add_option("--variant", a.variant,
                  "regional_cross, extended_self, per_object_cross or all")
      ->capture_default_str();
  cmd->add_option("--out,-o", a.out, "Output CSV (stdout when omitted)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regional grounding toolkit", "rgk"};
  app.set_version_flag("--version", std::string("rgk ") + rgk::kVersion);
  bool help_json = false;
  app.add_flag("--help-json", help_json, "Print a machine-readable description of all commands");

  PartitionArgs part;
  auto* partition = app.add_subcommand("partition", "Partition a token grid by covering set");
  partition->add_option("layout", part.layout, "Layout JSON file")->required();
  partition->add_option("--grid", part.grid, "Token grid HxW")->capture_default_str();
  partition->add_option("--out,-o", part.out, "Output JSON (stdout when omitted)");
  partition->add_flag("--lenient", part.lenient, "Warn about unknown layout fields instead of failing");

  AttendArgs att;
  auto* attend = app.add_subcommand("attend", "Run the regional cross-attention layer");
  attend->add_option("layout", att.layout, "Layout JSON file")->required();
  attend->add_option("--grid", att.grid, "Token grid HxW for generated features")
      ->capture_default_str();
  attend->add_option("--channels", att.channels, "Channels of generated features")
      ->capture_default_str();
  attend->add_option("--dim", att.dim, "Attention width d")->capture_default_str();
  attend->add_option("--heads", att.heads, "Attention heads")->capture_default_str();
  attend->add_option("--text-dim", att.text_dim, "Text embedding width")->capture_default_str();
  attend->add_option("--box-dim", att.box_dim, "Box indicator width (multiple of 8)")
      ->capture_default_str();
  attend->add_option("--mode", att.mode, "full, no_reorg_avg or no_box_indicator")
      ->capture_default_str();
  attend->add_option("--seed", att.seed, "Seed for weights and generated features");
  attend->add_option("--features", att.features, "Input feature file (H, W, C header + float32)");
  attend->add_flag("--zero-init", att.zero_init, "Keep the freshly initialized zero output projection");
  attend->add_option("--out,-o", att.out, "Output feature file")->required();
  attend->add_option("--diagnostics", att.diagnostics, "Diagnostics JSON (stdout when omitted)");
  attend->add_flag("--lenient", att.lenient, "Warn about unknown layout fields instead of failing");

  GenArgs gen;
  auto* gen_layouts = app.add_subcommand("gen-layouts", "Generate synthetic layout files");
  gen_layouts->add_option("--count", gen.count, "Number of layouts")->required();
  gen_layouts->add_option("--seed", gen.seed, "Generator seed");
  gen_layouts->add_option("--min-objects", gen.min_objects)->capture_default_str();
  gen_layouts->add_option("--max-objects", gen.max_objects)->capture_default_str();
  gen_layouts->add_option("--overlap-bias", gen.overlap_bias,
                          "Probability a box is centered inside an earlier one")
      ->capture_default_str();
  gen_layouts->add_option("--vocab", gen.vocab, "Label file, one description per line");
  gen_layouts->add_option("--out-dir", gen.out_dir, "Output directory")->capture_default_str();
  gen_layouts->add_option("--width", gen.width, "Image width in pixels")->capture_default_str();
  gen_layouts->add_option("--height", gen.height, "Image height in pixels")->capture_default_str();

  CostArgs flops_args;
  auto* flops = app.add_subcommand("flops", "FLOPs of layout-conditioning attention variants");
  add_cost_options(flops, flops_args);

  CostArgs bench_args;
  auto* bench = app.add_subcommand("bench", "FLOPs plus measured CPU time per variant");
  add_cost_options(bench, bench_args);
  bench->add_option("--repetitions", bench_args.repetitions, "Timed runs per config")
      ->capture_default_str();
  bench->add_option("--seed", bench_args.seed, "Seed for synthetic inputs");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Layout-fidelity and description metrics");
  eval->require_subcommand(1);
  auto add_eval_options = [&ev](CLI::App* cmd, bool scored) {
    cmd->add_option("layouts", ev.layouts, "Layout JSON files (sample id = file stem)")
        ->required();
    cmd->add_option("--out,-o", ev.out, "Report JSON (stdout when omitted)");
    cmd->add_flag("--lenient", ev.lenient, "Warn about unknown layout fields instead of failing");
    if (!scored) return;
    cmd->add_option("--images", ev.images, "Directory of <sample>.ppm images");
    cmd->add_option("--lower", ev.lower, "Drop objects below this area fraction")
        ->capture_default_str();
    cmd->add_option("--upper", ev.upper, "Drop objects above this area fraction")
        ->capture_default_str();
    cmd->add_option("--backend", ev.backend, "mock or files")->capture_default_str();
    cmd->add_option("--embeddings", ev.embeddings, "Embedding JSON for --backend files");
    cmd->add_option("--masks", ev.masks, "Directory of <sample>_<object>.pgm masks");
    cmd->add_option("--seed", ev.seed, "Seed of the mock embedder")->capture_default_str();
    cmd->add_option("--csv", ev.csv, "Also write the report as CSV");
  };
  auto* cropclip = eval->add_subcommand("cropclip", "Crop-and-embed object/label alignment");
  add_eval_options(cropclip, true);
  auto* samiou = eval->add_subcommand("samiou", "IoU of box and circumscribed mask rectangle");
  add_eval_options(samiou, true);
  auto* stats = eval->add_subcommand("stats", "Description length, Gunning Fog and buckets");
  add_eval_options(stats, false);

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Merge metric reports and cost sweeps into CSV");
  report->add_option("--metrics", rep.metrics, "Metric report JSON files");
  report->add_option("--costs", rep.costs, "Cost sweep CSV files");
  report->add_option("--out-samples", rep.out_samples, "Joined per-sample CSV (stdout when omitted)");
  report->add_option("--out-costs", rep.out_costs, "Concatenated cost CSV (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (help_json) {
    std::cout << rgk::to_canonical_json(describe_app(app));
    return 0;
  }

  try {
    if (partition->parsed()) return run_partition(part);
    if (attend->parsed()) return run_attend(att);
    if (gen_layouts->parsed()) return run_gen_layouts(gen);
    if (flops->parsed()) return run_cost(flops_args, false);
    if (bench->parsed()) return run_cost(bench_args, true);
    if (cropclip->parsed()) return run_eval_scores(ev, rgk::ScoreKind::crop_clip);
    if (samiou->parsed()) return run_eval_scores(ev, rgk::ScoreKind::sam_iou);
    if (stats->parsed()) return run_eval_stats(ev);
    if (report->parsed()) return run_report(rep);
    std::cerr << app.help();
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const rgk::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const rgk::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
