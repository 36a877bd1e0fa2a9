#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoidet/annotations.hpp"
#include "hoidet/geometry.hpp"

namespace hoidet {

// Intersection over union under the continuous area convention. Disjoint
// boxes give 0; two zero-area boxes are an error.
double iou(const BoundingBox& a, const BoundingBox& b);

struct EvalPair {
  std::optional<BoundingBox> predicted;
  BoundingBox truth;
  std::string image_id;
  int tuple_index = 0;
};

// Fraction of pairs whose prediction is present and overlaps the truth with
// IoU strictly above the threshold; absent predictions are misses.
double tuple_recall(const std::vector<EvalPair>& pairs, double iou_threshold);

struct DetectionRecord {
  std::string image_id;
  std::string object_class;
  double score = 0;
  BoundingBox box;
};

struct GroundTruthBox {
  std::string image_id;
  std::string object_class;
  BoundingBox box;
};

struct ApResult {
  std::map<std::string, double> per_class;
  double mAP = 0;
};

enum class ApInterp { AllPoint, ElevenPoint };

// Greedy matching per class: detections in descending score order claim the
// unmatched truth with the highest IoU when that IoU is strictly above the
// threshold. AP integrates the precision envelope (all-point) or samples it
// at 11 recall values. Classes with ground truth but no detections score 0.
ApResult mean_average_precision(const std::vector<DetectionRecord>& detections,
                                const std::vector<GroundTruthBox>& truth,
                                double iou_threshold = 0.5,
                                ApInterp interp = ApInterp::AllPoint);

// Flattens annotated records into matcher-ready ground truth, keeping only
// classes in `class_filter` when it is non-empty.
std::vector<GroundTruthBox> ground_truth_from_records(
    const std::vector<ImageRecord>& records,
    const std::set<std::string>& class_filter = {});

nlohmann::json ap_result_to_json(const ApResult& result);

}  // namespace hoidet
