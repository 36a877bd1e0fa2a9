#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoidet/annotations.hpp"
#include "hoidet/checkpoint.hpp"
#include "hoidet/detector.hpp"
#include "hoidet/features.hpp"
#include "hoidet/pseudolabel.hpp"
#include "hoidet/rrpn.hpp"
#include "hoidet/synthworld.hpp"

namespace hoidet {

struct SynthSection {
  bool enabled = false;
  int n_source = 9;
  int n_target = 3;
  int tuples_per_source_class = 100;
  int tuples_per_target_class = 10;
};

struct PipelineConfig {
  // data: either an existing annotated dataset or a synthetic-world section
  std::string annotations;
  std::string embeddings;
  SynthSection synth;
  std::string excluded_verb = kNoInteractionVerb;

  // geometry
  int image_size = 320;
  int grid_size = 40;
  int c_img = 64;
  double pose_sigma = 2.0;   // grid cells
  double anchor_px = 0;      // 0 -> image_size / 5

  FeatureSet active;         // rrpn input families
  double lambda = 10.0;
  double delta = 0.1;
  BoxPolicy box_policy = BoxPolicy::Hull;

  int n_target_classes = 10;                 // frequency split
  std::vector<std::string> split_source;     // explicit split override
  std::vector<std::string> split_target;

  SgdConfig sgd;             // lr 1e-3, momentum 0.9, weight decay 1e-4
  int batch_size = 4;
  int epochs_source = 15;
  int epochs_target = 30;
  bool freeze_backbone = false;  // target phase only

  double test_fraction = 0.2;
  double score_threshold = 0.05;
  double nms_iou = 0.5;
  bool supervised_control = false;

  std::uint64_t seed = 17;
  int threads = 2;
  std::string out_dir;

  double anchor() const { return anchor_px > 0 ? anchor_px : image_size / 5.0; }
  Dims image_dims() const { return {image_size, image_size}; }
  Dims grid_dims() const { return {grid_size, grid_size}; }
  DetGeom det_geom() const { return {image_dims(), grid_dims(), anchor()}; }
};

// Parses and validates; unknown values and missing required fields raise
// errors that name the field.
PipelineConfig config_from_json(const nlohmann::json& doc);
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const PipelineConfig& cfg);

// Resolved dataset plus everything the phases share.
struct DataBundle {
  std::vector<ImageRecord> records;  // post no-interaction filter
  SplitSpec split;
  EmbeddingTable embeddings;
  std::filesystem::path annotations_path;
  std::set<std::string> test_images;  // image ids in the held-out partition
};

// Loads (or synthesizes under out_dir/synth) the dataset, filters the
// excluded verb, splits classes and partitions images into train/test.
DataBundle prepare_data(const PipelineConfig& cfg,
                        const std::filesystem::path& out_dir);

// Decoded-image cache; preload before any parallel section, lookups after
// that are read-only and thread-safe.
class ImageCache {
 public:
  void preload(const std::vector<ImageRecord>& records,
               const std::filesystem::path& annotations_path);
  const Image& get(const ImageRecord& record) const;
  std::function<Image(const ImageRecord&)> loader() const;

 private:
  std::map<std::string, Image> by_id_;
};

struct SourceTrainEpoch {
  double l_cls = 0, l_loc = 0, l_att = 0, l_total = 0;
};

struct SourceTrainResult {
  Backbone backbone;
  Rrpn rrpn;
  DetectorNet detector;
  std::vector<SourceTrainEpoch> trace;
};

// Joint source-class phase: supervised detector training plus attention
// supervision, gradients from both losses meeting in the shared backbone.
SourceTrainResult train_source_phase(const PipelineConfig& cfg,
                                     const DataBundle& data,
                                     const ImageCache& images);

struct RunPaths {
  std::filesystem::path out_dir;
  std::filesystem::path split_file() const { return out_dir / "split.json"; }
  std::filesystem::path source_rrpn_stem() const {
    return out_dir / "checkpoints" / "source_rrpn";
  }
  std::filesystem::path source_detector_stem() const {
    return out_dir / "checkpoints" / "source_detector";
  }
  std::filesystem::path target_detector_stem() const {
    return out_dir / "checkpoints" / "target_detector";
  }
  std::filesystem::path target_supervised_stem() const {
    return out_dir / "checkpoints" / "target_supervised";
  }
  std::filesystem::path pseudo_annotations() const {
    return out_dir / "pseudo" / "pseudo_annotations.json";
  }
  std::filesystem::path pseudo_report() const {
    return out_dir / "pseudo" / "pseudo_report.json";
  }
  std::filesystem::path report() const { return out_dir / "report.json"; }
};

// Individual phases as used by the CLI subcommands. Each reads its inputs
// from and writes its artifacts into the run directory.
void phase_train_source(const PipelineConfig& cfg, const DataBundle& data,
                        RunPaths paths, nlohmann::json* phase_report = nullptr);
void phase_pseudolabel(const PipelineConfig& cfg, const DataBundle& data,
                       RunPaths paths, nlohmann::json* phase_report = nullptr);
void phase_train_target(const PipelineConfig& cfg, const DataBundle& data,
                        RunPaths paths, bool supervised_labels,
                        nlohmann::json* phase_report = nullptr);
nlohmann::json phase_eval(const PipelineConfig& cfg, const DataBundle& data,
                          RunPaths paths);

// All phases end to end; returns the report that was written to
// <out>/report.json. Deterministic for a fixed config + seed.
nlohmann::json run_pipeline(const PipelineConfig& cfg);

// Axis name -> list of values; axes: features, lambda, delta,
// n_target_classes, freeze_backbone, box_policy.
using AblationGrid = std::map<std::string, std::vector<nlohmann::json>>;

AblationGrid ablation_grid_from_json(const nlohmann::json& doc);

// Runs run_pipeline per grid cell (cartesian product); failed cells are
// recorded and the sweep continues. Writes ablation_report.json and SVG
// comparison plots under <out>/plots.
nlohmann::json run_ablation(const PipelineConfig& base,
                            const AblationGrid& grid);

}  // namespace hoidet
