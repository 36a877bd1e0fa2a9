#include "hoidet/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "hoidet/util.hpp"

namespace hoidet {

double iou(const BoundingBox& a, const BoundingBox& b) {
  check(a.ordered() && b.ordered(), "iou: malformed box");
  const double area_a = a.area(), area_b = b.area();
  check(area_a > 0 || area_b > 0, "iou: both boxes have zero area");
  const double ix = std::max(
      0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(
      0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = area_a + area_b - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double tuple_recall(const std::vector<EvalPair>& pairs, double iou_threshold) {
  check(!pairs.empty(), "tuple_recall: empty pair list");
  long hits = 0;
  for (const auto& p : pairs) {
    if (!p.predicted) continue;
    if (iou(*p.predicted, p.truth) > iou_threshold) ++hits;
  }
  return double(hits) / double(pairs.size());
}

namespace {

struct PrPoint {
  double recall = 0;
  double precision = 0;
};

double area_under_envelope(std::vector<PrPoint> pts, ApInterp interp) {
  // envelope: precision at recall r is the max precision at recall >= r
  std::sort(pts.begin(), pts.end(), [](const PrPoint& a, const PrPoint& b) {
    return a.recall < b.recall;
  });
  if (interp == ApInterp::ElevenPoint) {
    double total = 0;
    for (int i = 0; i <= 10; ++i) {
      const double r = i / 10.0;
      double best = 0;
      for (const auto& p : pts)
        if (p.recall >= r) best = std::max(best, p.precision);
      total += best;
    }
    return total / 11.0;
  }
  double total = 0;
  double prev_recall = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].recall <= prev_recall) continue;
    double best = 0;
    for (std::size_t j = i; j < pts.size(); ++j)
      best = std::max(best, pts[j].precision);
    total += (pts[i].recall - prev_recall) * best;
    prev_recall = pts[i].recall;
  }
  return total;
}

}  // namespace

ApResult mean_average_precision(const std::vector<DetectionRecord>& detections,
                                const std::vector<GroundTruthBox>& truth,
                                double iou_threshold, ApInterp interp) {
  std::set<std::string> classes;
  for (const auto& g : truth) classes.insert(g.object_class);

  ApResult result;
  if (classes.empty()) return result;

  for (const auto& cls : classes) {
    // per-image list of ground truths of this class and their matched flags
    std::map<std::string, std::vector<const GroundTruthBox*>> gt_by_image;
    long n_gt = 0;
    for (const auto& g : truth)
      if (g.object_class == cls) {
        gt_by_image[g.image_id].push_back(&g);
        ++n_gt;
      }
    std::map<const GroundTruthBox*, bool> matched;

    std::vector<const DetectionRecord*> dets;
    for (const auto& d : detections)
      if (d.object_class == cls) dets.push_back(&d);
    std::stable_sort(dets.begin(), dets.end(),
                     [](const DetectionRecord* a, const DetectionRecord* b) {
                       if (a->score != b->score) return a->score > b->score;
                       return a->image_id < b->image_id;
                     });

    long tp = 0, fp = 0;
    std::vector<PrPoint> pts;
    pts.reserve(dets.size());
    for (const auto* d : dets) {
      const GroundTruthBox* best = nullptr;
      double best_iou = 0;
      auto it = gt_by_image.find(d->image_id);
      if (it != gt_by_image.end()) {
        for (const auto* g : it->second) {
          if (matched[g]) continue;
          const double v = iou(d->box, g->box);
          if (v > best_iou) {
            best_iou = v;
            best = g;
          }
        }
      }
      if (best && best_iou > iou_threshold) {
        matched[best] = true;
        ++tp;
      } else {
        ++fp;
      }
      pts.push_back({double(tp) / double(n_gt), double(tp) / double(tp + fp)});
    }
    result.per_class[cls] = dets.empty() ? 0.0 : area_under_envelope(pts, interp);
  }

  double sum = 0;
  for (const auto& [cls, ap] : result.per_class) sum += ap;
  result.mAP = sum / double(result.per_class.size());
  return result;
}

std::vector<GroundTruthBox> ground_truth_from_records(
    const std::vector<ImageRecord>& records,
    const std::set<std::string>& class_filter) {
  std::vector<GroundTruthBox> out;
  for (const auto& rec : records)
    for (const auto& tup : rec.tuples) {
      if (!tup.object_box) continue;
      if (!class_filter.empty() && !class_filter.count(tup.object_class))
        continue;
      out.push_back({rec.image_id, tup.object_class, *tup.object_box});
    }
  return out;
}

nlohmann::json ap_result_to_json(const ApResult& result) {
  return nlohmann::json{{"per_class", result.per_class},
                        {"mAP", result.mAP}};
}

}  // namespace hoidet
