#include "hoidet/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hoidet/util.hpp"

namespace hoidet {

FeatureSet feature_set_from_names(const std::vector<std::string>& names) {
  FeatureSet set{false, false, false};
  for (const auto& n : names) {
    if (n == "image" || n == "I")
      set.image = true;
    else if (n == "pose" || n == "P")
      set.pose = true;
    else if (n == "verb" || n == "V")
      set.verb = true;
    else
      fail("unknown feature kind '" + n + "' (expected image/pose/verb)");
  }
  check(set.any(), "feature set must contain at least one active kind");
  return set;
}

std::vector<std::string> feature_set_names(const FeatureSet& set) {
  std::vector<std::string> out;
  if (set.image) out.push_back("image");
  if (set.pose) out.push_back("pose");
  if (set.verb) out.push_back("verb");
  return out;
}

std::string feature_set_label(const FeatureSet& set) {
  std::string out;
  for (auto [flag, tag] : {std::pair{set.image, "I"}, {set.pose, "P"},
                           {set.verb, "V"}}) {
    if (!flag) continue;
    if (!out.empty()) out += "+";
    out += tag;
  }
  return out;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  check(bool(f), "embedding file not found: " + path.string());
  EmbeddingTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    Vector vec{};
    for (int i = 0; i < kVerbDim; ++i)
      check(bool(ss >> vec[i]), path.string() + ":" + std::to_string(lineno) +
                                    ": expected " + std::to_string(kVerbDim) +
                                    " numbers after token '" + token + "'");
    float extra;
    check(!(ss >> extra), path.string() + ":" + std::to_string(lineno) +
                              ": too many numbers for token '" + token + "'");
    check(!table.contains(token), path.string() + ":" +
                                      std::to_string(lineno) +
                                      ": duplicate token '" + token + "'");
    table.insert(token, vec);
  }
  return table;
}

void EmbeddingTable::save(const std::map<std::string, Vector>& rows,
                          const std::filesystem::path& path) {
  std::ofstream f(path);
  check(bool(f), "cannot open " + path.string() + " for writing");
  f.precision(8);
  for (const auto& [token, vec] : rows) {
    f << token;
    for (float x : vec) f << ' ' << x;
    f << '\n';
  }
  check(bool(f), "short write to " + path.string());
}

void EmbeddingTable::insert(const std::string& token, const Vector& vec) {
  rows_[token] = vec;
}

bool EmbeddingTable::contains(const std::string& token) const {
  return rows_.count(token) > 0;
}

const EmbeddingTable::Vector& EmbeddingTable::row(
    const std::string& token) const {
  auto it = rows_.find(token);
  if (it == rows_.end()) fail("embedding lookup failed for token '" + token + "'");
  return it->second;
}

EmbeddingTable::Vector embed_verb(const std::string& verb,
                                  const EmbeddingTable& table) {
  check(!verb.empty(), "embed_verb: empty verb");
  std::vector<std::string> words;
  std::string cur;
  for (char ch : verb) {
    if (ch == ' ' || ch == '_') {
      if (!cur.empty()) words.push_back(std::exchange(cur, {}));
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) words.push_back(cur);
  check(!words.empty(), "embed_verb: verb '" + verb + "' has no words");
  EmbeddingTable::Vector out{};
  for (const auto& w : words) {
    const auto& row = table.row(w);
    for (int i = 0; i < kVerbDim; ++i) out[i] += row[i];
  }
  if (words.size() > 1)
    for (auto& x : out) x /= float(words.size());
  return out;
}

FeatureGrid broadcast_verb(const EmbeddingTable::Vector& vec, Dims grid) {
  check(grid.width > 0 && grid.height > 0, "broadcast_verb: empty grid");
  for (float x : vec)
    check(std::isfinite(x), "broadcast_verb: non-finite verb vector");
  FeatureGrid out{FeatureKind::Verb,
                  TensorF(kVerbDim, grid.height, grid.width)};
  for (int k = 0; k < kVerbDim; ++k) {
    float* plane = out.values.plane(k);
    std::fill(plane, plane + std::size_t(grid.height) * grid.width, vec[k]);
  }
  return out;
}

FeatureGrid render_pose_heatmaps(const Keypoints& keypoints, Dims image,
                                 Dims grid, double sigma) {
  check(sigma > 0, "render_pose_heatmaps: sigma must be positive");
  check(grid.width > 0 && grid.height > 0, "render_pose_heatmaps: empty grid");
  const double sx = double(image.width) / grid.width;
  const double sy = double(image.height) / grid.height;
  FeatureGrid out{FeatureKind::Pose,
                  TensorF(kPoseJoints, grid.height, grid.width)};
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (int j = 0; j < kPoseJoints; ++j) {
    if (!keypoints[j]) continue;
    const auto& kp = *keypoints[j];
    check(kp.x >= 0 && kp.x <= image.width && kp.y >= 0 && kp.y <= image.height,
          "render_pose_heatmaps: keypoint " + std::to_string(j) +
              " outside the image");
    const int cx = std::min(grid.width - 1, int(std::floor(kp.x / sx)));
    const int cy = std::min(grid.height - 1, int(std::floor(kp.y / sy)));
    float* plane = out.values.plane(j);
    for (int r = 0; r < grid.height; ++r)
      for (int c = 0; c < grid.width; ++c) {
        const double d2 = double(c - cx) * (c - cx) + double(r - cy) * (r - cy);
        plane[std::size_t(r) * grid.width + c] = float(std::exp(-d2 * inv2s2));
      }
  }
  return out;
}

FeatureGrid extract_image_features(const Image& image, const Backbone& net,
                                   Backbone::Cache& cache) {
  check(image.width % kBackboneStride == 0 &&
            image.height % kBackboneStride == 0,
        "extract_image_features: image dims must be a multiple of " +
            std::to_string(kBackboneStride) + ", got " +
            std::to_string(image.width) + "x" + std::to_string(image.height));
  TensorF in = image_to_tensor<float>(image);
  return FeatureGrid{FeatureKind::Image, net.forward(in, cache)};
}

FeatureVolume fuse(const FeatureGrid* image, const FeatureGrid* pose,
                   const FeatureGrid* verb, const FeatureSet& active,
                   const FuseSpec& spec) {
  check(active.any(), "fuse: no active feature kinds");
  const int widths[3] = {spec.c_img, kPoseJoints, kVerbDim};
  const FeatureGrid* grids[3] = {image, pose, verb};
  FeatureVolume out;
  out.provenance = active;
  out.values = TensorF(fused_channels(spec.c_img), spec.grid.height,
                       spec.grid.width);
  static const char* kind_names[3] = {"image", "pose", "verb"};
  int offset = 0;
  for (int k = 0; k < 3; ++k) {
    const auto kind = FeatureKind(k);
    if (active.active(kind)) {
      check(grids[k] != nullptr, std::string("fuse: active kind '") +
                                     kind_names[k] + "' requires a grid");
      check(grids[k]->kind == kind, std::string("fuse: grid in the '") +
                                        kind_names[k] + "' slot has the wrong kind");
      const auto& g = grids[k]->values;
      check(g.c == widths[k], "fuse: grid has " + std::to_string(g.c) +
                                  " channels, expected " +
                                  std::to_string(widths[k]));
      check(g.h == spec.grid.height && g.w == spec.grid.width,
            "fuse: spatial dims mismatch");
      std::memcpy(out.values.plane(offset), g.v.data(),
                  g.size() * sizeof(float));
    }
    offset += widths[k];
  }
  return out;
}

}  // namespace hoidet
