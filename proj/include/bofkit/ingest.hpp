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

// Dataset I/O: a subset of the COCO annotation and results JSON formats, and
// binary PPM (P6, maxval 255) images.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bofkit/evalap.hpp"
#include "bofkit/geometry.hpp"
#include "bofkit/image.hpp"
#include "bofkit/nms.hpp"
#include "json.hpp"

namespace bofkit {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ImageInfo {
  ImageId id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageInfo&, const ImageInfo&) = default;
};

struct Annotation {
  std::int64_t id = 0;
  ImageId image_id = 0;
  std::array<double, 4> bbox{};  // x, y, w, h
  int category_id = 0;
  double weight = 1.0;  // optional "weight" field written for mixed labels

  Box box() const { return {bbox[0], bbox[1], bbox[0] + bbox[2], bbox[1] + bbox[3]}; }

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Category {
  int id = 0;
  std::string name;

  friend bool operator==(const Category&, const Category&) = default;
};

struct DatasetIndex {
  std::vector<ImageInfo> images;
  std::vector<Annotation> annotations;
  std::vector<Category> categories;

  const ImageInfo* find_image(ImageId id) const {
    for (const auto& im : images) {
      if (im.id == id) return &im;
    }
    return nullptr;
  }

  // Annotations of one image, in file order.
  std::vector<Annotation> annotations_for(ImageId id) const {
    std::vector<Annotation> out;
    for (const auto& a : annotations) {
      if (a.image_id == id) out.push_back(a);
    }
    return out;
  }

  // Every image appears, including ones without annotations.
  TruthsByImage truths() const {
    TruthsByImage out;
    for (const auto& im : images) out[im.id];
    for (const auto& a : annotations) out[a.image_id].push_back({a.box(), a.category_id});
    return out;
  }

  friend bool operator==(const DatasetIndex&, const DatasetIndex&) = default;
};

namespace detail {

template <typename T>
T require(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw DatasetError(where + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DatasetError(where + ": field '" + key + "' has the wrong type");
  }
}

inline std::array<double, 4> require_bbox(const nlohmann::json& obj, const std::string& where) {
  const auto v = require<std::vector<double>>(obj, "bbox", where);
  if (v.size() != 4) throw DatasetError(where + ": bbox must have 4 numbers");
  for (double x : v) {
    if (!std::isfinite(x)) throw DatasetError(where + ": bbox contains a non-finite value");
  }
  if (v[2] < 0.0 || v[3] < 0.0) throw DatasetError(where + ": bbox has negative width or height");
  return {v[0], v[1], v[2], v[3]};
}

inline const nlohmann::json& require_array(const nlohmann::json& root, const char* key) {
  if (!root.is_object() || !root.contains(key) || !root.at(key).is_array()) {
    throw DatasetError(std::string("annotations: missing top-level array '") + key + "'");
  }
  return root.at(key);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DatasetError("write failed for " + path.string());
}

}  // namespace detail

// Parses and verifies referential integrity. Unknown fields are ignored.
inline DatasetIndex annotations_from_json(const nlohmann::json& root) {
  DatasetIndex index;
  std::set<ImageId> image_ids;
  std::set<int> category_ids;
  std::set<std::int64_t> annotation_ids;

  for (const auto& j : detail::require_array(root, "images")) {
    const std::string where = "image " + (j.is_object() && j.contains("id") ? j["id"].dump() : "?");
    ImageInfo im{detail::require<ImageId>(j, "id", where),
                 detail::require<std::string>(j, "file_name", where),
                 detail::require<int>(j, "width", where), detail::require<int>(j, "height", where)};
    if (im.width <= 0 || im.height <= 0) throw DatasetError(where + ": non-positive dimensions");
    if (!image_ids.insert(im.id).second) throw DatasetError(where + ": duplicate image id");
    index.images.push_back(std::move(im));
  }
  for (const auto& j : detail::require_array(root, "categories")) {
    const std::string where = "category " + (j.is_object() && j.contains("id") ? j["id"].dump() : "?");
    Category c{detail::require<int>(j, "id", where), detail::require<std::string>(j, "name", where)};
    if (!category_ids.insert(c.id).second) throw DatasetError(where + ": duplicate category id");
    index.categories.push_back(std::move(c));
  }
  for (const auto& j : detail::require_array(root, "annotations")) {
    const std::string where = "annotation " + (j.is_object() && j.contains("id") ? j["id"].dump() : "?");
    Annotation a;
    a.id = detail::require<std::int64_t>(j, "id", where);
    a.image_id = detail::require<ImageId>(j, "image_id", where);
    a.category_id = detail::require<int>(j, "category_id", where);
    a.bbox = detail::require_bbox(j, where);
    if (j.contains("weight")) {
      a.weight = detail::require<double>(j, "weight", where);
      if (!(a.weight > 0.0 && a.weight <= 1.0)) throw DatasetError(where + ": weight must lie in (0, 1]");
    }
    if (!annotation_ids.insert(a.id).second) throw DatasetError(where + ": duplicate annotation id");
    if (!image_ids.contains(a.image_id)) {
      throw DatasetError(where + ": image_id " + std::to_string(a.image_id) + " does not exist");
    }
    if (!category_ids.contains(a.category_id)) {
      throw DatasetError(where + ": category_id " + std::to_string(a.category_id) + " does not exist");
    }
    index.annotations.push_back(a);
  }
  return index;
}

inline DatasetIndex parse_annotations(std::string_view text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DatasetError(std::string("annotations: malformed JSON: ") + e.what());
  }
  return annotations_from_json(root);
}

inline DatasetIndex load_annotations(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  try {
    return parse_annotations(std::string_view(text));
  } catch (const DatasetError& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
}

inline nlohmann::json to_json(const DatasetIndex& index) {
  nlohmann::json root{{"images", nlohmann::json::array()},
                      {"annotations", nlohmann::json::array()},
                      {"categories", nlohmann::json::array()}};
  for (const auto& im : index.images) {
    root["images"].push_back(
        {{"id", im.id}, {"file_name", im.file_name}, {"width", im.width}, {"height", im.height}});
  }
  for (const auto& a : index.annotations) {
    nlohmann::json j{{"id", a.id},
                     {"image_id", a.image_id},
                     {"category_id", a.category_id},
                     {"bbox", {a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]}},
                     {"area", a.bbox[2] * a.bbox[3]},
                     {"iscrowd", 0}};
    if (a.weight != 1.0) j["weight"] = a.weight;
    root["annotations"].push_back(std::move(j));
  }
  for (const auto& c : index.categories) root["categories"].push_back({{"id", c.id}, {"name", c.name}});
  return root;
}

inline void save_annotations(const DatasetIndex& index, const std::filesystem::path& path) {
  detail::write_file(path, to_json(index).dump(2) + "\n");
}

// COCO results format: [{image_id, category_id, bbox: [x, y, w, h], score}].
inline DetectionsByImage detections_from_json(const nlohmann::json& root) {
  if (!root.is_array()) throw DatasetError("detections: expected a JSON array");
  DetectionsByImage out;
  std::size_t i = 0;
  for (const auto& j : root) {
    const std::string where = "detection #" + std::to_string(i++);
    Detection d;
    const ImageId image = detail::require<ImageId>(j, "image_id", where);
    d.class_id = detail::require<int>(j, "category_id", where);
    d.score = detail::require<double>(j, "score", where);
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw DatasetError(where + ": score must lie in [0, 1]");
    const auto b = detail::require_bbox(j, where);
    d.box = {b[0], b[1], b[0] + b[2], b[1] + b[3]};
    out[image].push_back(d);
  }
  return out;
}

inline DetectionsByImage parse_detections(std::string_view text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DatasetError(std::string("detections: malformed JSON: ") + e.what());
  }
  return detections_from_json(root);
}

inline DetectionsByImage load_detections(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  try {
    return parse_detections(std::string_view(text));
  } catch (const DatasetError& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
}

inline nlohmann::json to_json(const DetectionsByImage& dets) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [image, list] : dets) {
    for (const auto& d : list) {
      out.push_back({{"image_id", image},
                     {"category_id", d.class_id},
                     {"bbox", {d.box.x_min, d.box.y_min, d.box.width(), d.box.height()}},
                     {"score", d.score}});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// PPM (P6)

inline ImageTensor decode_ppm(std::string_view bytes) {
  std::size_t pos = 0;
  const auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto read_int = [&](const char* what) {
    skip_space();
    long long v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos++] - '0');
      if (++digits > 9) throw DatasetError(std::string("ppm: ") + what + " too large");
    }
    if (digits == 0) throw DatasetError(std::string("ppm: missing ") + what);
    return static_cast<int>(v);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw DatasetError("ppm: not a binary PPM (expected magic 'P6')");
  }
  pos = 2;
  const int width = read_int("width");
  const int height = read_int("height");
  const int maxval = read_int("maxval");
  if (width <= 0 || height <= 0) throw DatasetError("ppm: non-positive dimensions");
  if (maxval != 255) throw DatasetError("ppm: only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw DatasetError("ppm: malformed header");
  }
  ++pos;  // single whitespace before the raster

  const std::size_t need = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() - pos < need) {
    throw DatasetError("ppm: truncated payload (" + std::to_string(bytes.size() - pos) + " of " +
                       std::to_string(need) + " bytes)");
  }
  ImageTensor img(width, height);
  auto& px = img.pixels();
  for (std::size_t i = 0; i < need; ++i) {
    px[i] = static_cast<float>(static_cast<unsigned char>(bytes[pos + i])) / 255.0f;
  }
  return img;
}

inline std::string encode_ppm(const ImageTensor& img) {
  std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.size());
  for (float v : img.pixels()) {
    const long q = std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f);
    out.push_back(static_cast<char>(static_cast<unsigned char>(q)));
  }
  return out;
}

inline ImageTensor load_image(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  try {
    return decode_ppm(bytes);
  } catch (const DatasetError& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
}

inline void save_image(const ImageTensor& img, const std::filesystem::path& path) {
  detail::write_file(path, encode_ppm(img));
}

}  // namespace bofkit
