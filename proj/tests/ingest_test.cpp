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

#include "bofkit/ingest.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "bofkit/random.hpp"

namespace bofkit {
namespace {

namespace fs = std::filesystem;

constexpr const char* kMinimal = R"({
  "images": [{"id": 1, "file_name": "a.ppm", "width": 64, "height": 48, "extra": true}],
  "annotations": [{"id": 7, "image_id": 1, "category_id": 3, "bbox": [10, 20, 30, 40]}],
  "categories": [{"id": 3, "name": "cat"}]
})";

std::string error_of(std::string_view text) {
  try {
    parse_annotations(text);
  } catch (const DatasetError& e) {
    return e.what();
  }
  return "";
}

fs::path temp_dir() {
  const fs::path d = fs::temp_directory_path() / ("bofkit_ingest_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
  fs::create_directories(d);
  return d;
}

TEST(AnnotationsTest, MinimalFile) {
  const DatasetIndex idx = parse_annotations(kMinimal);
  EXPECT_EQ(idx.images.size(), 1u);
  EXPECT_EQ(idx.annotations.size(), 1u);
  EXPECT_EQ(idx.categories.size(), 1u);
  EXPECT_EQ(idx.annotations[0].box(), (Box{10, 20, 40, 60}));
  EXPECT_EQ(idx.images[0].file_name, "a.ppm");
  EXPECT_EQ(idx.truths().at(1).size(), 1u);
}

TEST(AnnotationsTest, DanglingImageNamesAnnotation) {
  const std::string msg = error_of(R"({"images": [], "categories": [{"id": 1, "name": "x"}],
      "annotations": [{"id": 42, "image_id": 5, "category_id": 1, "bbox": [0, 0, 1, 1]}]})");
  EXPECT_NE(msg.find("annotation 42"), std::string::npos) << msg;
  EXPECT_NE(msg.find("image_id 5"), std::string::npos) << msg;
}

TEST(AnnotationsTest, OtherIntegrityErrors) {
  EXPECT_NE(error_of("{not json").find("malformed JSON"), std::string::npos);
  EXPECT_NE(error_of(R"({"images": []})").find("annotations"), std::string::npos);
  const std::string neg = error_of(R"({"images": [{"id": 1, "file_name": "a", "width": 4, "height": 4}],
      "categories": [{"id": 1, "name": "x"}],
      "annotations": [{"id": 9, "image_id": 1, "category_id": 1, "bbox": [0, 0, -1, 1]}]})");
  EXPECT_NE(neg.find("annotation 9"), std::string::npos) << neg;
  const std::string cat = error_of(R"({"images": [{"id": 1, "file_name": "a", "width": 4, "height": 4}],
      "categories": [],
      "annotations": [{"id": 9, "image_id": 1, "category_id": 2, "bbox": [0, 0, 1, 1]}]})");
  EXPECT_NE(cat.find("category_id 2"), std::string::npos) << cat;
  const std::string dup = error_of(R"({"images": [{"id": 1, "file_name": "a", "width": 4, "height": 4},
      {"id": 1, "file_name": "b", "width": 4, "height": 4}], "categories": [], "annotations": []})");
  EXPECT_NE(dup.find("duplicate image id"), std::string::npos) << dup;
}

TEST(AnnotationsTest, RoundTripIsFixedPoint) {
  DatasetIndex idx = parse_annotations(kMinimal);
  idx.annotations.push_back({8, 1, {1.5, 2.25, 3, 4}, 3, 0.25});
  const DatasetIndex again = annotations_from_json(to_json(idx));
  EXPECT_EQ(again, idx);
  EXPECT_EQ(to_json(again), to_json(idx));

  const fs::path p = temp_dir() / "ann.json";
  save_annotations(idx, p);
  EXPECT_EQ(load_annotations(p), idx);
}

TEST(AnnotationsTest, MissingFileNamesPath) {
  try {
    load_annotations("/nonexistent/dir/ann.json");
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/ann.json"), std::string::npos);
  }
}

TEST(DetectionsTest, ParseAndRoundTrip) {
  const DetectionsByImage d = parse_detections(
      R"([{"image_id": 2, "category_id": 1, "bbox": [1, 2, 3, 4], "score": 0.5}])");
  ASSERT_EQ(d.at(2).size(), 1u);
  EXPECT_EQ(d.at(2)[0].box, (Box{1, 2, 4, 6}));
  EXPECT_EQ(detections_from_json(to_json(d)), d);
  EXPECT_THROW(parse_detections(R"([{"image_id": 2, "category_id": 1, "bbox": [1, 2, 3, 4], "score": 1.5}])"),
               DatasetError);
  EXPECT_THROW(parse_detections(R"({"a": 1})"), DatasetError);
}

TEST(PpmTest, SingleRedPixel) {
  const std::string bytes = std::string("P6\n1 1\n255\n") + '\xff' + '\0' + '\0';
  const ImageTensor img = decode_ppm(bytes);
  EXPECT_EQ(img.at(0, 0, 0), 1.0f);
  EXPECT_EQ(img.at(0, 0, 1), 0.0f);
  EXPECT_EQ(img.at(0, 0, 2), 0.0f);
}

TEST(PpmTest, HandBuiltGradientWithComment) {
  std::string bytes = "P6 # comment\n2 2\n255\n";
  const unsigned char raster[12] = {0, 51, 102, 153, 204, 255, 255, 0, 51, 17, 34, 68};
  bytes.append(reinterpret_cast<const char*>(raster), 12);
  const ImageTensor img = decode_ppm(bytes);
  ASSERT_EQ(img.width(), 2);
  ASSERT_EQ(img.height(), 2);
  for (int i = 0; i < 12; ++i) EXPECT_EQ(img.pixels()[static_cast<std::size_t>(i)], raster[i] / 255.0f) << i;
  EXPECT_EQ(encode_ppm(img).substr(encode_ppm(img).size() - 12), std::string(reinterpret_cast<const char*>(raster), 12));
}

TEST(PpmTest, Errors) {
  EXPECT_THROW(decode_ppm("P3\n1 1\n255\n0 0 0"), DatasetError);
  EXPECT_THROW(decode_ppm("P6\n1 1\n65535\n"), DatasetError);
  try {
    decode_ppm("P6\n2 2\n255\nabc");
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("3 of 12"), std::string::npos) << e.what();
  }
}

TEST(PpmTest, SaveLoadIsIdempotent) {
  Rng rng(3);
  ImageTensor img(13, 7);
  for (float& v : img.pixels()) v = static_cast<float>(rng.uniform());
  const fs::path p = temp_dir() / "img.ppm";
  save_image(img, p);
  const ImageTensor once = load_image(p);
  save_image(once, p);
  EXPECT_EQ(load_image(p), once);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(once.pixels()[i], img.pixels()[i], 0.5 / 255 + 1e-6);
}

}  // namespace
}  // namespace bofkit
