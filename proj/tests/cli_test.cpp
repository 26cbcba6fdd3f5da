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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bofkit/bofkit.hpp"
#include "json.hpp"

namespace bofkit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunResult {
  int code = -1;
  std::string out;
};

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("bofkit_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

RunResult run(const std::string& args) {
  const fs::path out = fs::temp_directory_path() / ("bofkit_cli_out_" + std::to_string(::getpid()));
  const std::string cmd = std::string(BOFKIT_CLI_PATH) + " " + args + " > " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// 64x48 images with three boxes each.
DatasetIndex toy_dataset(int images, Rng& rng) {
  DatasetIndex idx;
  idx.categories = {{0, "a"}, {1, "b"}};
  std::int64_t ann = 1;
  for (int i = 1; i <= images; ++i) {
    idx.images.push_back({i, "img" + std::to_string(i) + ".ppm", 64, 48});
    for (int j = 0; j < 3; ++j) {
      const double w = rng.uniform(4, 30), h = rng.uniform(4, 30);
      idx.annotations.push_back(
          {ann++, i, {rng.uniform(0, 64 - w), rng.uniform(0, 48 - h), w, h}, static_cast<int>(rng.index(2)), 1.0});
    }
  }
  return idx;
}

fs::path write_toy_images(const fs::path& dir, const DatasetIndex& idx, Rng& rng) {
  for (const auto& im : idx.images) {
    ImageTensor img(im.width, im.height);
    for (float& v : img.pixels()) v = static_cast<float>(rng.uniform());
    save_image(img, dir / im.file_name);
  }
  save_annotations(idx, dir / "ann.json");
  return dir / "ann.json";
}

std::vector<Anchor> parse_anchor_lines(const std::string& out) {
  std::vector<Anchor> a;
  std::istringstream is(out);
  std::string line;
  while (std::getline(is, line)) {
    double w, h;
    char comma;
    std::istringstream ls(line);
    if (ls >> w >> comma >> h && comma == ',') a.push_back({w, h});
  }
  return a;
}

TEST(CliTest, NoSubcommandFails) {
  EXPECT_NE(run("").code, 0);
  EXPECT_NE(run("frobnicate").code, 0);
}

TEST(CliTest, OptimizeAnchorsNineSortedByArea) {
  Rng rng(1);
  const fs::path d = scratch("anchors9");
  save_annotations(toy_dataset(40, rng), d / "ann.json");
  const RunResult r = run("optimize-anchors --annotations " + (d / "ann.json").string() + " -k 9");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto anchors = parse_anchor_lines(r.out);
  ASSERT_EQ(anchors.size(), 9u) << r.out;
  for (std::size_t i = 1; i < anchors.size(); ++i) EXPECT_LE(anchors[i - 1].area(), anchors[i].area() + 1e-9);
  EXPECT_NE(r.out.find("recall@0.213"), std::string::npos) << r.out;
}

TEST(CliTest, OptimizeAnchorsIdenticalBoxes) {
  DatasetIndex idx;
  idx.categories = {{0, "a"}};
  idx.images = {{1, "x.ppm", 512, 256}};
  for (int i = 1; i <= 10; ++i) idx.annotations.push_back({i, 1, {5, 5, 40, 20}, 0, 1.0});
  const fs::path d = scratch("anchors1");
  save_annotations(idx, d / "ann.json");
  const RunResult r = run("optimize-anchors --json -k 1 --annotations " + (d / "ann.json").string());
  ASSERT_EQ(r.code, 0);
  const json j = json::parse(r.out);
  // Image is already 512 wide, so no rescale.
  EXPECT_DOUBLE_EQ(j["anchors"][0][0].get<double>(), 40.0);
  EXPECT_DOUBLE_EQ(j["anchors"][0][1].get<double>(), 20.0);
  EXPECT_DOUBLE_EQ(j["recall"].get<double>(), 1.0);
}

TEST(CliTest, EvolveNeverLowersRecall) {
  for (std::uint64_t seed : {0, 1, 2}) {
    Rng rng(seed + 10);
    const fs::path d = scratch("evolve" + std::to_string(seed));
    save_annotations(toy_dataset(60, rng), d / "ann.json");
    const std::string base = "optimize-anchors --json -k 3 --seed " + std::to_string(seed) +
                             " --annotations " + (d / "ann.json").string();
    const RunResult plain = run(base), evolved = run(base + " --evolve --generations 8");
    ASSERT_EQ(plain.code, 0);
    ASSERT_EQ(evolved.code, 0);
    const json p = json::parse(plain.out), e = json::parse(evolved.out);
    EXPECT_GE(e["recall"].get<double>(), p["recall"].get<double>());
  }
}

TEST(CliTest, OptimizeAnchorsMissingFile) {
  EXPECT_EQ(run("optimize-anchors --annotations /nonexistent/ann.json").code, 1);
  EXPECT_NE(run("optimize-anchors -k 3").code, 0);
}

// Truth file plus perfect detections for it.
void write_eval_case(const fs::path& d, Rng& rng, bool duplicate) {
  DatasetIndex idx;
  idx.categories = {{0, "a"}, {1, "b"}};
  json dets = json::array();
  std::int64_t ann = 1;
  for (int i = 1; i <= 3; ++i) {
    idx.images.push_back({i, "i.ppm", 400, 400});
    for (int j = 0; j < 4; ++j) {
      // Disjoint columns so no two truths overlap.
      const double x = 100.0 * j + 5, y = rng.uniform(0, 200), w = rng.uniform(10, 90), h = rng.uniform(10, 190);
      const int c = static_cast<int>(rng.index(2));
      idx.annotations.push_back({ann++, i, {x, y, w, h}, c, 1.0});
      const double s = rng.uniform(0.3, 0.9);
      dets.push_back({{"image_id", i}, {"category_id", c}, {"bbox", {x, y, w, h}}, {"score", s}});
      if (duplicate) {
        dets.push_back({{"image_id", i}, {"category_id", c}, {"bbox", {x + 1, y + 1, w, h}}, {"score", s * 0.5}});
      }
    }
  }
  save_annotations(idx, d / "ann.json");
  write_text(d / "dets.json", dets.dump());
}

TEST(CliTest, EvalPerfectDetections) {
  Rng rng(3);
  const fs::path d = scratch("evalperfect");
  write_eval_case(d, rng, false);
  const std::string files = " --dets " + (d / "dets.json").string() + " --annotations " + (d / "ann.json").string();
  const RunResult r = run("eval --json --nms none" + files);
  ASSERT_EQ(r.code, 0);
  const json j = json::parse(r.out);
  for (const char* k : {"AP", "AP50", "AP75"}) EXPECT_EQ(j[k].get<double>(), 1.0) << k;
  for (const char* k : {"AP_S", "AP_M", "AP_L"}) {
    if (!j[k].is_null()) EXPECT_EQ(j[k].get<double>(), 1.0) << k;
  }
  const RunResult table = run("eval" + files);
  ASSERT_EQ(table.code, 0);
  EXPECT_NE(table.out.find("AP50"), std::string::npos);
  EXPECT_NE(table.out.find("1.0000"), std::string::npos);
}

TEST(CliTest, EvalGreedyRemovesDuplicates) {
  Rng a(4), b(4);
  const fs::path clean = scratch("evalclean"), dup = scratch("evaldup");
  write_eval_case(clean, a, false);
  write_eval_case(dup, b, true);
  const auto ap = [](const fs::path& d, const std::string& nms) {
    const RunResult r = run("eval --json --nms " + nms + " --nms-threshold 0.5 --dets " +
                            (d / "dets.json").string() + " --annotations " + (d / "ann.json").string());
    EXPECT_EQ(r.code, 0);
    return json::parse(r.out);
  };
  const json base = ap(clean, "none"), deduped = ap(dup, "greedy");
  EXPECT_EQ(deduped["detections_kept"], base["detections_in"]);
  for (const char* k : {"AP", "AP50", "AP75"}) EXPECT_EQ(deduped[k].get<double>(), base[k].get<double>()) << k;
  EXPECT_LT(ap(dup, "none")["AP"].get<double>(), base["AP"].get<double>());
}

TEST(CliTest, EvalDiouKeepsAtLeastGreedyOnDenseScene) {
  // A diagonal chain of 40x40 boxes, each shifted (8, 8) from the previous:
  // neighbour IoU 0.47 but DIoU 0.44, so greedy drops every other box at 0.45.
  DatasetIndex idx;
  idx.categories = {{0, "p"}};
  idx.images = {{1, "c.ppm", 400, 400}};
  json dets = json::array();
  for (int i = 0; i < 20; ++i) {
    const double x = 8.0 * i;
    idx.annotations.push_back({i + 1, 1, {x, x, 40, 40}, 0, 1.0});
    dets.push_back({{"image_id", 1}, {"category_id", 0}, {"bbox", {x, x, 40, 40}}, {"score", 0.9 - 0.01 * i}});
  }
  const fs::path d = scratch("evaldense");
  save_annotations(idx, d / "ann.json");
  write_text(d / "dets.json", dets.dump());
  const auto kept = [&](const std::string& nms) {
    const RunResult r = run("eval --json --nms " + nms + " --nms-threshold 0.45 --dets " +
                            (d / "dets.json").string() + " --annotations " + (d / "ann.json").string());
    EXPECT_EQ(r.code, 0);
    return json::parse(r.out)["detections_kept"].get<int>();
  };
  EXPECT_EQ(kept("greedy"), 10);
  EXPECT_EQ(kept("diou"), 20);
}

TEST(CliTest, EvalRejectsUnknownNms) {
  EXPECT_NE(run("eval --nms bogus --dets a --annotations b").code, 0);
}

TEST(CliTest, AugmentDeterministicAndReloadable) {
  Rng rng(5);
  const fs::path d = scratch("augin");
  const DatasetIndex idx = toy_dataset(6, rng);
  const fs::path ann = write_toy_images(d, idx, rng);
  for (const char* op : {"mosaic", "mixup", "cutmix", "photometric", "blur", "geometric"}) {
    SCOPED_TRACE(op);
    const fs::path o1 = scratch(std::string("aug1_") + op), o2 = scratch(std::string("aug2_") + op);
    const std::string base = std::string("augment --seed 7 --op ") + op + " --annotations " + ann.string() +
                             " --images-dir " + d.string() + " --out-dir ";
    ASSERT_EQ(run(base + o1.string()).code, 0);
    ASSERT_EQ(run(base + o2.string()).code, 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(o1)) {
      ++files;
      EXPECT_EQ(read_bytes(e.path()), read_bytes(o2 / e.path().filename())) << e.path();
    }
    const DatasetIndex out = load_annotations(o1 / "annotations.json");
    EXPECT_EQ(out.images.size() + 1, files);
    EXPECT_EQ(out.images.size(), std::string(op) == "mosaic" ? 1u : 6u);
    for (const auto& im : out.images) {
      EXPECT_EQ(load_image(o1 / im.file_name).width(), im.width);
    }
    for (const auto& a : out.annotations) {
      const ImageInfo& im = *out.find_image(a.image_id);
      const Box b = a.box();
      EXPECT_GE(b.x_min, 0.0);
      EXPECT_GE(b.y_min, 0.0);
      EXPECT_LE(b.x_max, im.width + 1e-9);
      EXPECT_LE(b.y_max, im.height + 1e-9);
    }
  }
}

TEST(CliTest, AugmentSeedChangesOutput) {
  Rng rng(6);
  const fs::path d = scratch("augseed");
  const fs::path ann = write_toy_images(d, toy_dataset(4, rng), rng);
  const fs::path o1 = scratch("augseed1"), o2 = scratch("augseed2");
  const std::string base = "augment --op mosaic --annotations " + ann.string() + " --images-dir " + d.string();
  ASSERT_EQ(run(base + " --seed 1 --out-dir " + o1.string()).code, 0);
  ASSERT_EQ(run(base + " --seed 2 --out-dir " + o2.string()).code, 0);
  EXPECT_NE(read_bytes(o1 / "aug_000000.ppm"), read_bytes(o2 / "aug_000000.ppm"));
}

TEST(CliTest, AugmentListsMissingImages) {
  Rng rng(7);
  const fs::path d = scratch("augmissing");
  const DatasetIndex idx = toy_dataset(3, rng);
  save_annotations(idx, d / "ann.json");
  const fs::path err = d / "err.txt";
  const std::string cmd = std::string(BOFKIT_CLI_PATH) + " augment --op blur --annotations " +
                          (d / "ann.json").string() + " --images-dir " + d.string() + " --out-dir " +
                          (d / "out").string() + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  EXPECT_TRUE(WIFEXITED(status) && WEXITSTATUS(status) != 0);
  const std::string msg = read_bytes(err);
  for (const char* f : {"img1.ppm", "img2.ppm", "img3.ppm"}) EXPECT_NE(msg.find(f), std::string::npos) << msg;
}

TEST(CliTest, BenchNms) {
  const RunResult one = run("bench-nms --json --n 1");
  ASSERT_EQ(one.code, 0);
  for (const auto& row : json::parse(one.out)["results"]) EXPECT_EQ(row["survivors"].get<int>(), 1);

  const RunResult big = run("bench-nms --json --n 2000 --variant greedy --seed 3");
  ASSERT_EQ(big.code, 0);
  EXPECT_EQ(json::parse(big.out)["oracle"], "OK");

  const auto survivors = [](const std::string& out) {
    std::vector<int> v;
    for (const auto& row : json::parse(out)["results"]) v.push_back(row["survivors"].get<int>());
    return v;
  };
  EXPECT_EQ(survivors(run("bench-nms --json --n 500 --seed 9").out),
            survivors(run("bench-nms --json --n 500 --seed 9").out));
  EXPECT_NE(run("bench-nms --n 0").code, 0);
  EXPECT_NE(run("bench-nms --variant nope").code, 0);
}

std::vector<std::pair<long, double>> parse_csv(const std::string& text) {
  std::vector<std::pair<long, double>> rows;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "step,lr");
  while (std::getline(is, line)) {
    const auto comma = line.find(',');
    rows.emplace_back(std::stol(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
  }
  return rows;
}

TEST(CliTest, ScheduleCosine) {
  const RunResult r = run("schedule --kind cosine --steps 100 --lr 0.1 --lr-min 0.001");
  ASSERT_EQ(r.code, 0);
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 101u);
  EXPECT_DOUBLE_EQ(rows.front().second, 0.1);
  EXPECT_DOUBLE_EQ(rows.back().second, 0.001);
  EXPECT_EQ(rows.back().first, 100);
}

TEST(CliTest, ScheduleStepDefaults) {
  const fs::path d = scratch("sched");
  ASSERT_EQ(run("schedule --kind step --out " + (d / "lr.csv").string()).code, 0);
  const auto rows = parse_csv(read_bytes(d / "lr.csv"));
  ASSERT_EQ(rows.size(), 500501u);
  EXPECT_DOUBLE_EQ(rows[399999].second, 0.01);
  EXPECT_NEAR(rows[400000].second, 0.001, 1e-15);
  EXPECT_NEAR(rows[449999].second, 0.001, 1e-15);
  EXPECT_NEAR(rows[450000].second, 0.0001, 1e-15);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (i != 400000 && i != 450000) ASSERT_EQ(rows[i].second, rows[i - 1].second) << i;
  }
}

TEST(CliTest, ScheduleRejectsBadSteps) {
  EXPECT_NE(run("schedule --steps 0").code, 0);
  EXPECT_NE(run("schedule --kind linear").code, 0);
}

}  // namespace
}  // namespace bofkit
