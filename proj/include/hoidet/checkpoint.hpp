#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoidet/nn.hpp"

namespace hoidet {

// Self-describing training artifact: <stem>.ckpt holds the raw float32
// tensors, <stem>.json lists block names, shapes and the run settings the
// parameters depend on. Both files are written to temp paths and renamed.
struct CheckpointManifest {
  std::string kind;  // "rrpn" | "detector"
  int grid_w = 0, grid_h = 0;
  int image_w = 0, image_h = 0;
  int c_img = 0;
  std::vector<std::string> active_features;
  double lambda = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> classes;  // detector checkpoints only
  double anchor_px = 0;
  nlohmann::json extra;
};

void save_checkpoint(const std::filesystem::path& stem,
                     const std::vector<ParamView<float>>& params,
                     const CheckpointManifest& manifest);

// Loads tensors into the given parameter views; every name and shape must
// match. Returns the manifest.
CheckpointManifest load_checkpoint(const std::filesystem::path& stem,
                                   std::vector<ParamView<float>> params);

CheckpointManifest read_manifest(const std::filesystem::path& stem);

std::filesystem::path checkpoint_archive_path(
    const std::filesystem::path& stem);

}  // namespace hoidet
