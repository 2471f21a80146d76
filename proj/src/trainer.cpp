#include "scribprop/trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace scribprop {

void validate(const TrainConfig& config) {
  if (config.outer_iterations < 1) throw Error(ErrorCode::InvalidParameter, "outer_iterations must be >= 1");
  if (config.threads < 1) throw Error(ErrorCode::InvalidParameter, "threads must be >= 1");
  validate(config.superpixel);
  validate(config.pairwise);
  if (!(config.predictor.learning_rate > 0.0) || config.predictor.epochs < 0 || !(config.predictor.l2 >= 0.0)) {
    throw Error(ErrorCode::InvalidParameter, "predictor config");
  }
}

PreparedImage prepare_image(RgbImage image, const TrainConfig& config) {
  PreparedImage out;
  out.superpixels = segment_fh(image, config.superpixel);
  out.features = superpixel_features(image, out.superpixels, config.pairwise.normalization);
  out.edges = weighted_edges(out.features, adjacency(out.superpixels), config.pairwise);
  out.image = std::move(image);
  return out;
}

LabelMap expand_labeling(const SuperpixelMap& map, const Labeling& y, const LabelUniverse& universe) {
  LabelMap out(map.width, map.height);
  for (std::size_t p = 0; p < map.ids.size(); ++p) {
    out.labels[p] = static_cast<std::uint16_t>(universe.labels[y[map.ids[p]]]);
  }
  return out;
}

Propagation propagate_prepared(const PreparedImage& prepared, const ScribbleSet& scribbles,
                               const Predictor* predictor, const TrainConfig& config) {
  return propagate_graph(prepared.superpixels, prepared.features, prepared.edges, scribbles, predictor, config);
}

Propagation propagate_graph(const SuperpixelMap& map, const FeatureMatrix& features,
                            const std::vector<WeightedEdge>& edges, const ScribbleSet& scribbles,
                            const Predictor* predictor, const TrainConfig& config) {
  if (scribbles.scribbles.empty()) throw Error(ErrorCode::NoScribbles, "image has no scribbles");
  validate(scribbles);
  Propagation out;
  out.universe = make_universe(scribbles);
  const auto overlaps = scribble_overlap(map, scribbles);
  UnaryTable scribble_term = scribble_unary(overlaps, out.universe);
  std::optional<UnaryTable> network_term;
  if (predictor) {
    network_term = predictor_unary(predictor->log_probs(map, features, out.universe), map,
                                   config.normalize_predictor_unary);
  }
  EnergyProblem problem =
      build_problem(combine_unaries(scribble_term, network_term), edges, out.universe, config.use_pairwise);

  std::optional<Labeling> init;
  if (!config.use_pairwise) {
    // Unmarked superpixels start as background when it is annotated.
    Labeling start = default_labeling(problem);
    const int background = std::max(out.universe.index_of(0), 0);
    for (int i = 0; i < map.count; ++i) {
      if (overlaps[i].empty()) start[i] = background;
    }
    init = std::move(start);
  }
  out.labeling = alpha_expansion(problem, init, &out.trace);
  out.energy = *total_energy(problem, out.labeling);
  out.labels = expand_labeling(map, out.labeling, out.universe);
  return out;
}

Propagation propagate_image(const RgbImage& image, const ScribbleSet& scribbles, const Predictor* predictor,
                            const TrainConfig& config) {
  if (image.width != scribbles.width || image.height != scribbles.height) {
    throw Error(ErrorCode::DimensionMismatch, "scribbles and image differ in size");
  }
  if (scribbles.scribbles.empty()) throw Error(ErrorCode::NoScribbles, "image has no scribbles");
  return propagate_prepared(prepare_image(image, config), scribbles, predictor, config);
}

namespace {

template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> workers;
  for (int t = 0; t < std::min<int>(threads, static_cast<int>(count)); ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  if (failure) std::rethrow_exception(failure);
}

// One weighted example per (superpixel, label) pair, weight = pixel count.
void append_examples(const PreparedImage& prepared, const LabelMap& labels, const LabelUniverse& universe,
                     std::vector<TrainingExample>& out) {
  const auto& map = prepared.superpixels;
  std::map<std::pair<int, int>, int> counts;
  for (std::size_t p = 0; p < map.ids.size(); ++p) {
    if (labels.labels[p] == kUnknownLabel) continue;
    const int idx = universe.index_of(labels.labels[p]);
    if (idx < 0) throw Error(ErrorCode::LabelOutOfRange, "label outside training universe");
    ++counts[{map.ids[p], idx}];
  }
  for (const auto& [key, count] : counts) {
    TrainingExample ex;
    ex.features = prepared.features.row(key.first).transpose();
    ex.label = key.second;
    ex.weight = count;
    out.push_back(std::move(ex));
  }
}

std::size_t count_changes(const LabelMap& a, const LabelMap& b) {
  std::size_t n = 0;
  for (std::size_t p = 0; p < a.labels.size(); ++p) n += a.labels[p] != b.labels[p];
  return n;
}

}  // namespace

TrainResult alternate_train(const std::vector<TrainingImage>& images, const TrainConfig& config,
                            const IterationCallback& on_iteration) {
  validate(config);
  if (images.empty()) throw Error(ErrorCode::EmptyDataset, "no training images");

  std::set<CategoryId> categories;
  for (const auto& img : images) {
    if (!img.scribbles && !img.mask) throw Error(ErrorCode::SchemaViolation, img.name + " has neither scribbles nor mask");
    if (img.mask) {
      if (img.mask->width != img.image.width || img.mask->height != img.image.height) {
        throw Error(ErrorCode::DimensionMismatch, img.name + ": mask size differs from image");
      }
      for (auto v : img.mask->labels) {
        if (v != kUnknownLabel) categories.insert(v);
      }
    } else {
      if (img.scribbles->width != img.image.width || img.scribbles->height != img.image.height) {
        throw Error(ErrorCode::DimensionMismatch, img.name + ": scribbles size differs from image");
      }
      if (img.scribbles->scribbles.empty()) throw Error(ErrorCode::NoScribbles, img.name);
      for (auto c : img.scribbles->categories()) categories.insert(c);
    }
  }
  const LabelUniverse dataset_universe{{categories.begin(), categories.end()}};
  if (dataset_universe.labels.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no labels in dataset");

  std::vector<PreparedImage> prepared(images.size());
  parallel_for(images.size(), config.threads, [&](std::size_t i) { prepared[i] = prepare_image(images[i].image, config); });

  TrainResult result;
  std::vector<LabelMap> labels(images.size());
  std::vector<ImageStats> stats(images.size());
  std::optional<ReferencePredictor> predictor;

  for (int iteration = 0; iteration < config.outer_iterations; ++iteration) {
    std::vector<LabelMap> previous = labels;
    parallel_for(images.size(), config.threads, [&](std::size_t i) {
      ImageStats s;
      s.name = images[i].name;
      if (images[i].mask) {
        labels[i] = *images[i].mask;
      } else {
        auto prop = propagate_prepared(prepared[i], *images[i].scribbles, predictor ? &*predictor : nullptr, config);
        labels[i] = std::move(prop.labels);
        s.energy = prop.energy;
      }
      s.changed_pixels = iteration == 0 ? 0 : count_changes(previous[i], labels[i]);
      stats[i] = std::move(s);
    });

    std::vector<TrainingExample> examples;
    for (std::size_t i = 0; i < images.size(); ++i) append_examples(prepared[i], labels[i], dataset_universe, examples);
    RefPredictorModel model = train(examples, dataset_universe, config.predictor);

    IterationRecord record{iteration, labels, model, stats};
    if (on_iteration) on_iteration(record);
    result.history.push_back(std::move(record));
    predictor.emplace(std::move(model));
  }
  result.model = predictor->model();
  result.labels = std::move(labels);
  return result;
}

std::vector<TrainingImage> load_training_images(const DatasetIndex& index) {
  std::vector<TrainingImage> out;
  std::set<std::string> used;
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    const auto& entry = index.entries[i];
    TrainingImage img;
    std::string name = entry.image.stem().string();
    if (!used.insert(name).second) {
      name += "_" + std::to_string(i);
      used.insert(name);
    }
    img.name = name;
    img.image = load_image(entry.image);
    if (entry.mask) {
      img.mask = load_labelmap(*entry.mask);
    } else {
      img.scribbles = load_scribbles(*entry.scribbles);
    }
    out.push_back(std::move(img));
  }
  return out;
}

TrainResult alternate_train(const DatasetIndex& dataset, const TrainConfig& config,
                            const std::filesystem::path& out_dir) {
  if (dataset.entries.empty()) throw Error(ErrorCode::EmptyDataset, "dataset index is empty");
  const auto images = load_training_images(dataset);
  return alternate_train(images, config, [&](const IterationRecord& record) {
    const auto dir = out_dir / ("iter" + std::to_string(record.iteration));
    nlohmann::ordered_json doc;
    doc["iteration"] = record.iteration;
    auto entries = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < images.size(); ++i) {
      save_labelmap(record.labels[i], dir / "labels" / (images[i].name + ".png"));
      nlohmann::ordered_json e;
      e["image"] = record.stats[i].name;
      e["energy"] = record.stats[i].energy ? nlohmann::ordered_json(*record.stats[i].energy)
                                           : nlohmann::ordered_json(nullptr);
      e["changed_pixels"] = record.stats[i].changed_pixels;
      entries.push_back(std::move(e));
    }
    doc["images"] = std::move(entries);
    save_model(record.model, dir / "model.json");
    write_file(dir / "stats.json", doc.dump(2));
  });
}

LabelMap infer(const RefPredictorModel& model, const RgbImage& image, const TrainConfig& config) {
  const auto map = segment_fh(image, config.superpixel);
  const auto features = superpixel_features(image, map, config.pairwise.normalization);
  const CostMatrix logp = predict_superpixels(model, features, model.universe);
  std::vector<CategoryId> best(map.count);
  for (int i = 0; i < map.count; ++i) {
    Eigen::Index idx = 0;
    for (Eigen::Index l = 1; l < logp.cols(); ++l) {
      if (logp(i, l) > logp(i, idx)) idx = l;
    }
    best[i] = model.universe.labels[idx];
  }
  LabelMap out(image.width, image.height);
  for (std::size_t p = 0; p < map.ids.size(); ++p) out.labels[p] = static_cast<std::uint16_t>(best[map.ids[p]]);
  return out;
}

}  // namespace scribprop
