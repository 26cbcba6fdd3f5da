// Copyright 2026 The bofkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// bofkit command-line front end.
//
//   bofkit optimize-anchors --annotations ann.json [-k 9] [--resolution 512] [--evolve]
//   bofkit eval --dets dets.json --annotations ann.json [--nms greedy]
//   bofkit augment --annotations ann.json --images-dir imgs --op mosaic --out-dir out
//   bofkit bench-nms [--n 1000] [--variant all]
//   bofkit schedule [--kind step] [--steps 500500]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bofkit/bofkit.hpp"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bofkit;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// optimize-anchors

struct AnchorOptions {
  std::string annotations;
  int k = 9;
  int resolution = 512;
  int iters = 300;
  bool evolve = false;
  int population = 20;
  int generations = 30;
  std::uint64_t seed = 0;
  bool json = false;
};

// Box shapes letterboxed into a square network input of side `resolution`.
std::vector<Anchor> letterboxed_shapes(const DatasetIndex& index, int resolution) {
  std::map<ImageId, double> scale;
  for (const auto& im : index.images) {
    scale[im.id] = static_cast<double>(resolution) / std::max(im.width, im.height);
  }
  std::vector<Anchor> shapes;
  for (const auto& a : index.annotations) {
    const double s = scale.at(a.image_id);
    if (a.bbox[2] > 0 && a.bbox[3] > 0) shapes.push_back({a.bbox[2] * s, a.bbox[3] * s});
  }
  return shapes;
}

int cmd_optimize_anchors(const AnchorOptions& o) {
  if (o.k < 1) throw UsageError("-k must be >= 1");
  if (o.resolution <= 0) throw UsageError("--resolution must be positive");
  const DatasetIndex index = load_annotations(o.annotations);
  const std::vector<Anchor> shapes = letterboxed_shapes(index, o.resolution);
  if (shapes.empty()) throw UsageError("dataset contains no boxes with positive size");

  Rng rng(o.seed);
  std::vector<Anchor> anchors = kmeans_anchors(shapes, o.k, o.iters, rng);
  const double kmeans_recall = anchor_recall(shapes, anchors);
  if (o.evolve) {
    GAConfig cfg;
    cfg.population = o.population;
    cfg.generations = o.generations;
    cfg.seed = o.seed;
    anchors = evolve_anchors(shapes, anchors, cfg, o.resolution);
  }
  const double recall = anchor_recall(shapes, anchors);
  const double miou = mean_best_iou(shapes, anchors);

  if (o.json) {
    json out{{"anchors", json::array()},
             {"boxes", shapes.size()},
             {"threshold", kDefaultAssignIouThreshold},
             {"recall", recall},
             {"kmeans_recall", kmeans_recall},
             {"mean_iou", miou}};
    for (const Anchor& a : anchors) out["anchors"].push_back({a.w, a.h});
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << std::fixed << std::setprecision(3);
    for (const Anchor& a : anchors) std::cout << a.w << "," << a.h << "\n";
    std::cout << std::setprecision(4) << "recall@" << kDefaultAssignIouThreshold << ": " << recall
              << "  mean_iou: " << miou << "  boxes: " << shapes.size() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::string dets;
  std::string annotations;
  std::string nms = "none";
  double nms_threshold = kDefaultDiouNmsThreshold;
  double soft_sigma = 0.5;
  double soft_floor = 0.001;
  std::string soft_mode = "gaussian";
  bool json = false;
};

NmsKind parse_nms(const std::string& s) {
  for (NmsKind k : {NmsKind::kNone, NmsKind::kGreedy, NmsKind::kSoft, NmsKind::kDiou}) {
    if (to_string(k) == s) return k;
  }
  throw UsageError("unknown --nms '" + s + "'");
}

int cmd_eval(const EvalOptions& o) {
  const NmsKind kind = parse_nms(o.nms);
  const DatasetIndex index = load_annotations(o.annotations);
  DetectionsByImage dets = load_detections(o.dets);

  SoftNmsParams soft;
  soft.iou_threshold = o.nms_threshold;
  soft.sigma = o.soft_sigma;
  soft.score_floor = o.soft_floor;
  soft.mode = o.soft_mode == "linear" ? SoftNmsMode::kLinear : SoftNmsMode::kGaussian;

  std::size_t before = 0, after = 0;
  for (auto& [image, list] : dets) {
    before += list.size();
    switch (kind) {
      case NmsKind::kNone: break;
      case NmsKind::kGreedy: list = greedy_nms(list, o.nms_threshold); break;
      case NmsKind::kSoft: list = soft_nms(list, soft); break;
      case NmsKind::kDiou: list = diou_nms(list, o.nms_threshold); break;
    }
    after += list.size();
  }

  const EvalResult r = evaluate(dets, index.truths());
  const std::pair<const char*, std::optional<double>> cols[] = {
      {"AP", r.ap}, {"AP50", r.ap50}, {"AP75", r.ap75},
      {"AP_S", r.ap_small}, {"AP_M", r.ap_medium}, {"AP_L", r.ap_large}};
  if (o.json) {
    json out{{"nms", o.nms}, {"detections_in", before}, {"detections_kept", after}};
    for (const auto& [name, v] : cols) out[name] = v ? json(*v) : json(nullptr);
    std::cout << out.dump(2) << "\n";
  } else {
    for (const auto& [name, v] : cols) std::cout << std::left << std::setw(8) << name;
    std::cout << "\n" << std::fixed << std::setprecision(4);
    for (const auto& [name, v] : cols) {
      std::ostringstream cell;
      if (v) cell << std::fixed << std::setprecision(4) << *v;
      else cell << "-";
      std::cout << std::left << std::setw(8) << cell.str();
    }
    std::cout << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// augment

struct AugmentOptions {
  std::string annotations;
  std::string images_dir;
  std::string op = "mosaic";
  std::string out_dir;
  std::uint64_t seed = 0;
  int radius = 2;
  int width = 0;   // mosaic canvas; 0 = first image of the group
  int height = 0;
};

int cmd_augment(const AugmentOptions& o) {
  static const std::vector<std::string> ops{"mosaic", "mixup", "cutmix", "photometric", "blur",
                                            "geometric"};
  if (std::find(ops.begin(), ops.end(), o.op) == ops.end()) throw UsageError("unknown --op '" + o.op + "'");
  if (o.radius < 0) throw UsageError("--radius must be >= 0");

  const DatasetIndex index = load_annotations(o.annotations);
  std::vector<ImageInfo> images = index.images;
  std::sort(images.begin(), images.end(), [](const ImageInfo& a, const ImageInfo& b) { return a.id < b.id; });

  std::vector<std::string> missing;
  for (const auto& im : images) {
    if (!fs::is_regular_file(fs::path(o.images_dir) / im.file_name)) missing.push_back(im.file_name);
  }
  if (!missing.empty()) {
    std::string msg = "missing image files in " + o.images_dir + ":";
    for (const auto& m : missing) msg += " " + m;
    throw DatasetError(msg);
  }

  std::vector<Sample> samples;
  for (const auto& im : images) {
    Sample s{load_image(fs::path(o.images_dir) / im.file_name), {}};
    for (const auto& a : index.annotations_for(im.id)) s.labels.push_back({a.box(), a.category_id, a.weight});
    samples.push_back(std::move(s));
  }

  Rng master(o.seed);
  std::vector<Sample> outputs;
  const std::size_t n = samples.size();
  if (o.op == "mosaic") {
    if (n < 4) throw UsageError("mosaic needs at least 4 images");
    for (std::size_t g = 0; g + 4 <= n; g += 4) {
      Rng rng = master.split();
      const int w = o.width > 0 ? o.width : samples[g].image.width();
      const int h = o.height > 0 ? o.height : samples[g].image.height();
      outputs.push_back(mosaic(std::span<const Sample>(samples).subspan(g, 4), w, h, rng));
    }
    if (n % 4 != 0) std::cerr << "bofkit: note: last " << n % 4 << " image(s) do not fill a mosaic group\n";
  } else if (o.op == "mixup" || o.op == "cutmix") {
    if (n < 2) throw UsageError(o.op + " needs at least 2 images");
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng = master.split();
      const Sample& a = samples[i];
      const Sample b = resize(samples[(i + 1) % n], a.image.width(), a.image.height());
      outputs.push_back(o.op == "mixup" ? mixup(a, b, rng.uniform()) : cutmix(a, b, rng));
    }
  } else {
    for (const Sample& s : samples) {
      Rng rng = master.split();
      if (o.op == "photometric") outputs.push_back(photometric(s, sample_photometric({}, rng), rng));
      else if (o.op == "blur") outputs.push_back(blur(s, o.radius));
      else outputs.push_back(random_geometric(s, {}, rng));
    }
  }

  fs::create_directories(o.out_dir);
  DatasetIndex out_index;
  out_index.categories = index.categories;
  std::int64_t ann_id = 1;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "aug_%06zu.ppm", i);
    const Sample& s = outputs[i];
    save_image(s.image, fs::path(o.out_dir) / name);
    const auto id = static_cast<ImageId>(i + 1);
    out_index.images.push_back({id, name, s.image.width(), s.image.height()});
    for (const Label& l : s.labels) {
      out_index.annotations.push_back(
          {ann_id++, id, {l.box.x_min, l.box.y_min, l.box.width(), l.box.height()}, l.class_id, l.weight});
    }
  }
  save_annotations(out_index, fs::path(o.out_dir) / "annotations.json");
  std::cout << "wrote " << outputs.size() << " sample(s) to " << o.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bench-nms

struct BenchOptions {
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string variant = "all";
  double threshold = 0.5;
  bool json = false;
};

// Boxes spread over a square whose side grows with sqrt(n), keeping the
// overlap density roughly constant.
std::vector<Detection> bench_detections(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const double span = 40.0 * std::sqrt(static_cast<double>(n));
  std::vector<Detection> dets(n);
  for (Detection& d : dets) {
    const double x = rng.uniform(0, span), y = rng.uniform(0, span);
    d.box = {x, y, x + rng.uniform(10, 80), y + rng.uniform(10, 80)};
    d.score = rng.uniform();
    d.class_id = static_cast<int>(rng.index(3));
  }
  return dets;
}

// Suppress-later formulation, kept deliberately naive.
std::vector<Detection> quadratic_nms(const std::vector<Detection>& dets, double thr) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<bool> dead(dets.size(), false);
  std::vector<Detection> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (dead[order[i]]) continue;
    const Detection& keep = dets[order[i]];
    out.push_back(keep);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const Detection& d = dets[order[j]];
      if (d.class_id == keep.class_id && iou(keep.box, d.box) > thr) dead[order[j]] = true;
    }
  }
  return out;
}

int cmd_bench_nms(const BenchOptions& o) {
  if (o.n < 1) throw UsageError("--n must be >= 1");
  static const std::vector<std::string> all{"greedy", "soft", "diou"};
  std::vector<std::string> variants;
  if (o.variant == "all") variants = all;
  else if (std::find(all.begin(), all.end(), o.variant) != all.end()) variants = {o.variant};
  else throw UsageError("unknown --variant '" + o.variant + "'");

  const std::vector<Detection> dets = bench_detections(o.n, o.seed);
  json rows = json::array();
  bool oracle_ok = true;
  std::string oracle = "skipped";
  for (const std::string& v : variants) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Detection> kept;
    if (v == "greedy") kept = greedy_nms(dets, o.threshold);
    else if (v == "soft") kept = soft_nms(dets, {o.threshold, 0.5, 0.001, SoftNmsMode::kGaussian});
    else kept = diou_nms(dets, o.threshold);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back({{"variant", v}, {"survivors", kept.size()}, {"ms", ms}});
    if (v == "greedy" && o.n <= 2000) {
      oracle_ok = kept == quadratic_nms(dets, o.threshold);
      oracle = oracle_ok ? "OK" : "MISMATCH";
    }
  }

  if (o.json) {
    std::cout << json{{"n", o.n}, {"seed", o.seed}, {"threshold", o.threshold}, {"results", rows},
                      {"oracle", oracle}}.dump(2)
              << "\n";
  } else {
    std::cout << std::left << std::setw(10) << "variant" << std::setw(12) << "survivors" << "ms\n";
    for (const auto& r : rows) {
      std::cout << std::left << std::setw(10) << r["variant"].get<std::string>() << std::setw(12)
                << r["survivors"].get<std::size_t>() << std::fixed << std::setprecision(3)
                << r["ms"].get<double>() << "\n";
    }
    std::cout << "oracle: " << oracle << "\n";
  }
  return oracle_ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// schedule

struct ScheduleOptions {
  std::string kind = "step";
  std::int64_t steps = kDefaultTotalSteps;
  double lr = kDefaultLearningRate;
  double lr_min = 0.0;
  double factor = kDefaultDecayFactor;
  std::vector<std::int64_t> milestones = default_milestones();
  std::string out;
};

int cmd_schedule(const ScheduleOptions& o) {
  if (o.kind != "cosine" && o.kind != "step") throw UsageError("unknown --kind '" + o.kind + "'");
  if (o.steps <= 0) throw UsageError("--steps must be positive");
  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) throw DatasetError("cannot write " + o.out);
  }
  std::ostream& os = o.out.empty() ? std::cout : file;
  std::vector<std::int64_t> milestones = o.milestones;
  std::sort(milestones.begin(), milestones.end());
  os << "step,lr\n";
  char buf[64];
  for (std::int64_t t = 0; t <= o.steps; ++t) {
    const double lr = o.kind == "cosine" ? cosine_lr(t, o.steps, o.lr, o.lr_min)
                                         : step_decay_lr(t, milestones, o.lr, o.factor);
    const int len = std::snprintf(buf, sizeof buf, "%lld,%.10g\n", static_cast<long long>(t), lr);
    os.write(buf, len);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bofkit: detector training utilities (anchors, evaluation, augmentation, NMS)"};
  app.require_subcommand(1);

  AnchorOptions anchors;
  auto* a = app.add_subcommand("optimize-anchors", "cluster box shapes into anchors");
  a->add_option("--annotations", anchors.annotations, "COCO-style annotation JSON")->required();
  a->add_option("-k", anchors.k, "number of anchors")->capture_default_str();
  a->add_option("--resolution", anchors.resolution, "square network input side")->capture_default_str();
  a->add_option("--iters", anchors.iters, "k-means iteration cap")->capture_default_str();
  a->add_flag("--evolve", anchors.evolve, "refine the k-means result with the GA");
  a->add_option("--population", anchors.population, "GA candidates per generation")->capture_default_str();
  a->add_option("--generations", anchors.generations, "GA generations")->capture_default_str();
  a->add_option("--seed", anchors.seed, "random seed")->capture_default_str();
  a->add_flag("--json", anchors.json, "machine-readable output");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "COCO-style AP of detections against annotations");
  e->add_option("--dets", ev.dets, "COCO results JSON")->required();
  e->add_option("--annotations", ev.annotations, "COCO-style annotation JSON")->required();
  e->add_option("--nms", ev.nms, "none, greedy, soft or diou")
      ->check(CLI::IsMember({"none", "greedy", "soft", "diou"}))
      ->capture_default_str();
  e->add_option("--nms-threshold", ev.nms_threshold, "suppression threshold")->capture_default_str();
  e->add_option("--soft-sigma", ev.soft_sigma, "gaussian soft-NMS sigma")->capture_default_str();
  e->add_option("--soft-floor", ev.soft_floor, "soft-NMS score floor")->capture_default_str();
  e->add_option("--soft-mode", ev.soft_mode, "linear or gaussian")
      ->check(CLI::IsMember({"linear", "gaussian"}))
      ->capture_default_str();
  e->add_flag("--json", ev.json, "machine-readable output");

  AugmentOptions aug;
  auto* g = app.add_subcommand("augment", "write augmented samples and their annotations");
  g->add_option("--annotations", aug.annotations, "COCO-style annotation JSON")->required();
  g->add_option("--images-dir", aug.images_dir, "directory holding the PPM images")->required();
  g->add_option("--op", aug.op, "mosaic, mixup, cutmix, photometric, blur or geometric")
      ->check(CLI::IsMember({"mosaic", "mixup", "cutmix", "photometric", "blur", "geometric"}))
      ->capture_default_str();
  g->add_option("--out-dir", aug.out_dir, "output directory")->required();
  g->add_option("--seed", aug.seed, "random seed")->capture_default_str();
  g->add_option("--radius", aug.radius, "blur radius")->capture_default_str();
  g->add_option("--width", aug.width, "mosaic canvas width (0: first image)")->capture_default_str();
  g->add_option("--height", aug.height, "mosaic canvas height (0: first image)")->capture_default_str();

  BenchOptions bench;
  auto* b = app.add_subcommand("bench-nms", "time NMS variants on random detections");
  b->add_option("--n", bench.n, "number of detections")->capture_default_str();
  b->add_option("--seed", bench.seed, "random seed")->capture_default_str();
  b->add_option("--variant", bench.variant, "all, greedy, soft or diou")->capture_default_str();
  b->add_option("--threshold", bench.threshold, "suppression threshold")->capture_default_str();
  b->add_flag("--json", bench.json, "machine-readable output");

  ScheduleOptions sched;
  auto* s = app.add_subcommand("schedule", "print a learning-rate schedule as CSV");
  s->add_option("--kind", sched.kind, "cosine or step")
      ->check(CLI::IsMember({"cosine", "step"}))
      ->capture_default_str();
  s->add_option("--steps", sched.steps, "total steps")->capture_default_str();
  s->add_option("--lr", sched.lr, "initial / maximum learning rate")->capture_default_str();
  s->add_option("--lr-min", sched.lr_min, "final learning rate (cosine)")->capture_default_str();
  s->add_option("--factor", sched.factor, "decay factor (step)")->capture_default_str();
  s->add_option("--milestones", sched.milestones, "decay steps (step)")->delimiter(',');
  s->add_option("--out", sched.out, "write CSV here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (a->parsed()) return cmd_optimize_anchors(anchors);
    if (e->parsed()) return cmd_eval(ev);
    if (g->parsed()) return cmd_augment(aug);
    if (b->parsed()) return cmd_bench_nms(bench);
    if (s->parsed()) return cmd_schedule(sched);
  } catch (const UsageError& err) {
    std::cerr << "bofkit: usage error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "bofkit: error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
