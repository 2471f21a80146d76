#include "scribprop/cli.hpp"

#include "scribprop/eval.hpp"
#include "scribprop/service.hpp"
#include "scribprop/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace scribprop {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParameter:
    case ErrorCode::InvalidSpec:
      return kExitConfig;
    case ErrorCode::NoFeasibleLabeling:
    case ErrorCode::InfeasibleCurrent:
      return kExitInfeasible;
    default:
      return kExitIo;
  }
}

std::string format_real(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

void add_superpixel_options(CLI::App* cmd, SuperpixelParams& p) {
  cmd->add_option("--k", p.k, "Felzenszwalb-Huttenlocher scale")->capture_default_str();
  cmd->add_option("--sigma", p.sigma, "Gaussian smoothing std")->capture_default_str();
  cmd->add_option("--min-size", p.min_size, "Minimum superpixel size")->capture_default_str();
}

void add_pairwise_options(CLI::App* cmd, PairwiseParams& p) {
  cmd->add_option("--lambda", p.lambda, "Pairwise weight")->capture_default_str();
  cmd->add_option("--delta-c", p.delta_c, "Color histogram bandwidth")->capture_default_str();
  cmd->add_option("--delta-t", p.delta_t, "Texture histogram bandwidth")->capture_default_str();
  const std::map<std::string, HistNormalization> norms{
      {"l1", HistNormalization::L1}, {"l2", HistNormalization::L2}, {"per-channel-l1", HistNormalization::PerChannelL1}};
  cmd->add_option("--hist-norm", p.normalization, "Histogram normalization")
      ->transform(CLI::CheckedTransformer(norms, CLI::ignore_case));
}

void add_predictor_options(CLI::App* cmd, PredictorConfig& p) {
  cmd->add_option("--lr", p.learning_rate, "Gradient descent step")->capture_default_str();
  cmd->add_option("--epochs", p.epochs, "Gradient descent iterations")->capture_default_str();
  cmd->add_option("--l2", p.l2, "Weight decay")->capture_default_str();
}

struct Options {
  TrainConfig train;
  fs::path image, scribbles, out, stats, overlay, index, model, pred, gt;
  std::string predictor = "none";
  bool no_pairwise = false;
  int num_classes = 0;
  double ratio = 1.0;
  int count = 20;
  SynthSpec synth;
  ServiceConfig service;
  int ttl_seconds = 30 * 60;
};

std::unique_ptr<Predictor> make_predictor(const std::string& spec) {
  if (spec == "none") return nullptr;
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  if (colon == std::string::npos || colon + 1 == spec.size() || (kind != "model" && kind != "logprob")) {
    throw Error(ErrorCode::InvalidParameter, "--predictor must be none, model:<path> or logprob:<path>");
  }
  const fs::path path = spec.substr(colon + 1);
  if (kind == "model") return std::make_unique<ReferencePredictor>(load_model(path));
  return std::make_unique<FilePredictor>(load_logprob_file(path));
}

int cmd_superpixels(const Options& o, std::ostream& out) {
  validate(o.train.superpixel);
  const RgbImage image = load_image(o.image);
  const SuperpixelMap map = segment_fh(image, o.train.superpixel);
  write_file(o.out, encode_superpixel_ids(map));
  const fs::path overlay = o.overlay.empty() ? fs::path(o.out).replace_extension().concat("_overlay.png") : o.overlay;
  save_image(boundary_overlay(image, map), overlay);
  out << "count: " << map.count << "\n";
  return kExitOk;
}

int cmd_propagate(Options o, std::ostream& out) {
  o.train.use_pairwise = !o.no_pairwise;
  validate(o.train);
  const RgbImage image = load_image(o.image);
  const ScribbleSet scribbles = load_scribbles(o.scribbles);
  const auto predictor = make_predictor(o.predictor);
  const Propagation result = propagate_image(image, scribbles, predictor.get(), o.train);
  save_labelmap(result.labels, o.out);

  ordered_json stats;
  stats["energy"] = result.energy;
  stats["superpixels"] = result.labeling.size();
  stats["universe"] = result.universe.labels;
  stats["cycles"] = result.trace.cycles;
  stats["seed"] = o.train.seed;
  const fs::path stats_path = o.stats.empty() ? o.out.parent_path() / "stats.json" : o.stats;
  write_file(stats_path, stats.dump(2));
  out << "energy: " << format_real(result.energy) << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  validate(o.train);
  const DatasetIndex index = load_dataset_index(o.index);
  const TrainResult result = alternate_train(index, o.train, o.out);
  save_model(result.model, o.out / "model.json");
  for (const auto& record : result.history) {
    std::size_t changed = 0;
    for (const auto& s : record.stats) changed += s.changed_pixels;
    out << "iteration " << record.iteration << ": changed_pixels " << changed << "\n";
  }
  return kExitOk;
}

int cmd_infer(const Options& o, std::ostream& out) {
  validate(o.train);
  const RefPredictorModel model = load_model(o.model);
  const LabelMap labels = infer(model, load_image(o.image), o.train);
  save_labelmap(labels, o.out);
  out << "wrote " << o.out.string() << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const LabelMap pred = load_labelmap(o.pred);
  const LabelMap gt = load_labelmap(o.gt);
  int classes = o.num_classes;
  if (classes <= 0) {
    // Every category that appears in either map.
    for (const auto* m : {&pred, &gt}) {
      for (auto v : m->labels) {
        if (v != kUnknownLabel) classes = std::max(classes, static_cast<int>(v) + 1);
      }
    }
  }
  const IoUReport report = miou(pred, gt, classes);
  if (!o.stats.empty()) write_file(o.stats, report_json(report));
  out << "miou: " << format_real(report.mean) << "\n";
  return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
  if (!(o.ratio >= 0.0 && o.ratio <= 1.0)) throw Error(ErrorCode::InvalidParameter, "--ratio must be in [0, 1]");
  const ScribbleSet shortened = shorten_scribbles(load_scribbles(o.scribbles), o.ratio, o.train.seed);
  save_scribbles(shortened, o.out);
  out << "scribbles: " << shortened.scribbles.size() << "\n";
  return kExitOk;
}

int cmd_gen(Options o, std::ostream& out) {
  if (o.count < 1) throw Error(ErrorCode::InvalidParameter, "--count must be >= 1");
  o.synth.seed = o.train.seed;
  validate(o.synth);
  DatasetIndex index;
  ordered_json manifest;
  manifest["count"] = o.count;
  manifest["seed"] = o.synth.seed;
  manifest["width"] = o.synth.width;
  manifest["height"] = o.synth.height;
  manifest["min_regions"] = o.synth.min_regions;
  manifest["max_regions"] = o.synth.max_regions;
  manifest["noise_std"] = o.synth.noise_std;
  manifest["scribble_fraction"] = o.synth.scribble_fraction;
  auto items = ordered_json::array();
  for (int i = 0; i < o.count; ++i) {
    SynthSpec spec = o.synth;
    spec.seed = o.synth.seed + static_cast<std::uint64_t>(i);
    const SynthSample sample = generate_synthetic(spec);
    std::ostringstream name;
    name << std::setw(4) << std::setfill('0') << i;
    DatasetEntry entry;
    entry.image = o.out / "images" / (name.str() + ".png");
    entry.scribbles = o.out / "scribbles" / (name.str() + ".json");
    const fs::path gt = o.out / "gt" / (name.str() + ".png");
    save_image(sample.image, entry.image);
    save_scribbles(sample.scribbles, *entry.scribbles);
    save_labelmap(sample.ground_truth, gt);
    ordered_json item;
    item["name"] = name.str();
    item["seed"] = spec.seed;
    item["gt"] = gt.lexically_relative(o.out).generic_string();
    items.push_back(std::move(item));
    index.entries.push_back(std::move(entry));
  }
  manifest["images"] = std::move(items);
  save_dataset_index(index, o.out / "index.json");
  write_file(o.out / "manifest.json", manifest.dump(2));
  out << "generated " << o.count << " images in " << o.out.string() << "\n";
  return kExitOk;
}

int cmd_serve(Options o, std::ostream& out) {
  if (o.ttl_seconds < 1) throw Error(ErrorCode::InvalidParameter, "--ttl must be >= 1");
  validate(o.train);
  o.service.idle_ttl = std::chrono::seconds(o.ttl_seconds);
  if (!o.model.empty()) o.service.model_path = o.model;
  o.service.defaults = o.train;
  SessionService service(o.service);
  out << "listening on " << o.service.host << ":" << o.service.port << std::endl;
  if (!service.listen()) throw Error(ErrorCode::IoFailure, "cannot listen on port " + std::to_string(o.service.port));
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Scribble-supervised label propagation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file of option defaults; flags override it");

  auto* sp = app.add_subcommand("superpixels", "Segment an image into superpixels");
  sp->add_option("image", o.image, "Input image")->required();
  sp->add_option("-o,--out", o.out, "16-bit superpixel id PNG")->required();
  sp->add_option("--overlay", o.overlay, "Boundary overlay PNG (default <out>_overlay.png)");
  add_superpixel_options(sp, o.train.superpixel);

  auto* prop = app.add_subcommand("propagate", "Propagate scribbles to a full label map");
  prop->add_option("image", o.image, "Input image")->required();
  prop->add_option("scribbles", o.scribbles, "Scribble JSON")->required();
  prop->add_option("-o,--out", o.out, "Label PNG")->required();
  prop->add_option("--stats", o.stats, "Stats JSON (default stats.json next to --out)");
  prop->add_flag("--no-pairwise", o.no_pairwise, "Drop the pairwise term");
  prop->add_option("--predictor", o.predictor, "none | model:<path> | logprob:<path>")->capture_default_str();
  prop->add_flag("--normalize-unary", o.train.normalize_predictor_unary, "Average predictor cost per superpixel");
  prop->add_option("--seed", o.train.seed, "Random seed")->capture_default_str();
  add_superpixel_options(prop, o.train.superpixel);
  add_pairwise_options(prop, o.train.pairwise);

  auto* train = app.add_subcommand("train", "Alternate propagation and predictor training");
  train->add_option("index", o.index, "Dataset index JSON")->required();
  train->add_option("-o,--out", o.out, "Checkpoint directory")->required();
  train->add_option("--iters", o.train.outer_iterations, "Outer iterations")->capture_default_str();
  train->add_option("--threads", o.train.threads, "Worker threads")->capture_default_str();
  train->add_flag("--no-pairwise", o.no_pairwise, "Drop the pairwise term");
  train->add_flag("--normalize-unary", o.train.normalize_predictor_unary, "Average predictor cost per superpixel");
  train->add_option("--seed", o.train.seed, "Random seed")->capture_default_str();
  add_superpixel_options(train, o.train.superpixel);
  add_pairwise_options(train, o.train.pairwise);
  add_predictor_options(train, o.train.predictor);

  auto* inf = app.add_subcommand("infer", "Label an image with a trained predictor alone");
  inf->add_option("model", o.model, "Model JSON")->required();
  inf->add_option("image", o.image, "Input image")->required();
  inf->add_option("-o,--out", o.out, "Label PNG")->required();
  add_superpixel_options(inf, o.train.superpixel);

  auto* ev = app.add_subcommand("eval", "Mean IoU of a label map against ground truth");
  ev->add_option("pred", o.pred, "Predicted label PNG")->required();
  ev->add_option("gt", o.gt, "Ground-truth label PNG")->required();
  ev->add_option("--num-classes", o.num_classes, "Class count (default: largest id present + 1)");
  ev->add_option("--stats", o.stats, "Write per-class report JSON");

  auto* syn = app.add_subcommand("synth", "Shorten scribbles to a fraction of their length");
  syn->add_option("scribbles", o.scribbles, "Scribble JSON")->required();
  syn->add_option("-o,--out", o.out, "Output scribble JSON")->required();
  syn->add_option("--ratio", o.ratio, "Kept length fraction; 0 gives spots")->required();
  syn->add_option("--seed", o.train.seed, "Random seed")->capture_default_str();

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("-o,--out", o.out, "Output directory")->required();
  gen->add_option("--count", o.count, "Number of images")->capture_default_str();
  gen->add_option("--seed", o.train.seed, "Seed of the first image")->capture_default_str();
  gen->add_option("--width", o.synth.width)->capture_default_str();
  gen->add_option("--height", o.synth.height)->capture_default_str();
  gen->add_option("--min-regions", o.synth.min_regions)->capture_default_str();
  gen->add_option("--max-regions", o.synth.max_regions)->capture_default_str();
  gen->add_option("--noise", o.synth.noise_std, "Gaussian noise std")->capture_default_str();
  gen->add_option("--fraction", o.synth.scribble_fraction, "Scribble length fraction")->capture_default_str();

  auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
  serve->add_option("--host", o.service.host)->capture_default_str();
  serve->add_option("--port", o.service.port)->capture_default_str();
  serve->add_option("--model", o.model, "Model JSON for predictor \"model\" mode");
  serve->add_option("--ttl", o.ttl_seconds, "Idle session lifetime in seconds")->capture_default_str();
  serve->add_option("--static", o.service.static_dir, "Directory served at /");
  serve->add_option("--cors-origin", o.service.cors_origin)->capture_default_str();
  serve->add_option("--max-side", o.service.max_image_side)->capture_default_str();
  add_superpixel_options(serve, o.train.superpixel);
  add_pairwise_options(serve, o.train.pairwise);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success&) {
    out << app.help(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*sp) return cmd_superpixels(o, out);
    if (*prop) return cmd_propagate(o, out);
    if (*train) {
      o.train.use_pairwise = !o.no_pairwise;
      return cmd_train(o, out);
    }
    if (*inf) return cmd_infer(o, out);
    if (*ev) return cmd_eval(o, out);
    if (*syn) return cmd_synth(o, out);
    if (*gen) return cmd_gen(o, out);
    if (*serve) return cmd_serve(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}

}  // namespace scribprop
