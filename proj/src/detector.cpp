#include "hoidet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hoidet/metrics.hpp"
#include "hoidet/util.hpp"

namespace hoidet {

namespace {

template <typename T>
T smooth_l1(T d) {
  const T a = std::abs(d);
  return a < T(1) ? T(0.5) * d * d : a - T(0.5);
}

template <typename T>
T smooth_l1_grad(T d) {
  if (d > T(1)) return T(1);
  if (d < T(-1)) return T(-1);
  return d;
}

// Order-independent choice among boxes containing a cell center: smallest
// area, then lexicographic coordinates, then class.
bool better_assignment(const LabeledBox& a, const LabeledBox& b) {
  const double aa = a.box.area(), ab = b.box.area();
  if (aa != ab) return aa < ab;
  auto ka = std::tuple(a.box.x_min, a.box.y_min, a.box.x_max, a.box.y_max,
                       a.class_index);
  auto kb = std::tuple(b.box.x_min, b.box.y_min, b.box.x_max, b.box.y_max,
                       b.class_index);
  return ka < kb;
}

}  // namespace

template <typename T>
DetectionLossResult<T> detection_loss(const Tensor3<T>& pred,
                                      const std::vector<LabeledBox>& targets,
                                      const DetGeom& geom, int num_classes,
                                      bool want_grad) {
  const int kc = num_classes + 1;  // classes + background
  check(pred.c == kc + 4, "detection_loss: head output has " +
                              std::to_string(pred.c) + " channels, expected " +
                              std::to_string(kc + 4));
  check(pred.h == geom.grid.height && pred.w == geom.grid.width,
        "detection_loss: grid dims mismatch");
  for (const auto& t : targets)
    check(t.class_index >= 0 && t.class_index < num_classes,
          "detection_loss: class index " + std::to_string(t.class_index) +
              " outside the class set");

  DetectionLossResult<T> res;
  if (want_grad) res.grad = Tensor3<T>(pred.c, pred.h, pred.w);

  const int cells = geom.grid.height * geom.grid.width;
  // first pass: assignments
  std::vector<const LabeledBox*> assign(std::size_t(cells), nullptr);
  for (int r = 0; r < geom.grid.height; ++r)
    for (int c = 0; c < geom.grid.width; ++c) {
      const double px = geom.cell_center_x(c), py = geom.cell_center_y(r);
      const LabeledBox** slot = &assign[std::size_t(r) * geom.grid.width + c];
      for (const auto& t : targets)
        if (t.box.contains_point(px, py) &&
            (!*slot || better_assignment(t, **slot)))
          *slot = &t;
    }
  int num_pos = 0;
  for (const auto* a : assign)
    if (a) ++num_pos;

  const T inv_cells = T(1) / T(cells);
  const T inv_pos = num_pos > 0 ? T(1) / T(num_pos) : T(0);
  std::vector<T> prob(std::size_t(kc));
  for (int r = 0; r < geom.grid.height; ++r)
    for (int c = 0; c < geom.grid.width; ++c) {
      const LabeledBox* t = assign[std::size_t(r) * geom.grid.width + c];
      const int label = t ? t->class_index : num_classes;
      // stable softmax over class logits
      T zmax = pred.at(0, r, c);
      for (int k = 1; k < kc; ++k) zmax = std::max(zmax, pred.at(k, r, c));
      T zsum = T(0);
      for (int k = 0; k < kc; ++k) {
        prob[k] = std::exp(pred.at(k, r, c) - zmax);
        zsum += prob[k];
      }
      for (int k = 0; k < kc; ++k) prob[k] /= zsum;
      res.l_cls += -std::log(std::max(prob[label], T(1e-30))) * inv_cells;
      if (want_grad)
        for (int k = 0; k < kc; ++k)
          res.grad.at(k, r, c) =
              (prob[k] - (k == label ? T(1) : T(0))) * inv_cells;

      if (t) {
        const T tx = T((t->box.center_x() - geom.cell_center_x(c)) /
                       geom.anchor_px);
        const T ty = T((t->box.center_y() - geom.cell_center_y(r)) /
                       geom.anchor_px);
        const T tw = T(std::log(t->box.width() / geom.anchor_px));
        const T th = T(std::log(t->box.height() / geom.anchor_px));
        const T want[4] = {tx, ty, tw, th};
        for (int k = 0; k < 4; ++k) {
          const T d = pred.at(kc + k, r, c) - want[k];
          res.l_loc += smooth_l1(d) * inv_pos;
          if (want_grad)
            res.grad.at(kc + k, r, c) = smooth_l1_grad(d) * inv_pos;
        }
      }
    }
  return res;
}

template DetectionLossResult<float> detection_loss<float>(
    const Tensor3<float>&, const std::vector<LabeledBox>&, const DetGeom&,
    int, bool);
template DetectionLossResult<double> detection_loss<double>(
    const Tensor3<double>&, const std::vector<LabeledBox>&, const DetGeom&,
    int, bool);

namespace {

std::vector<LabeledBox> targets_for_record(
    const ImageRecord& rec, const std::vector<std::string>& classes) {
  std::vector<LabeledBox> out;
  for (const auto& tup : rec.tuples) {
    if (!tup.object_box) continue;
    auto it = std::lower_bound(classes.begin(), classes.end(),
                               tup.object_class);
    check(it != classes.end() && *it == tup.object_class,
          "image '" + rec.image_id + "': object class '" + tup.object_class +
              "' outside the detector class set");
    // degenerate boxes cannot be box-regression targets
    check(tup.object_box->width() > 0 && tup.object_box->height() > 0,
          "image '" + rec.image_id + "': zero-area training box");
    out.push_back({int(it - classes.begin()), *tup.object_box});
  }
  return out;
}

}  // namespace

DetectorNet train_detector(
    const std::vector<ImageRecord>& records,
    const std::vector<std::string>& class_set, const DetectorTrainConfig& cfg,
    DetectorInit init, const Backbone* reuse_from,
    const std::function<Image(const ImageRecord&)>& load_image,
    std::vector<EpochLoss>* trace) {
  check(!records.empty(), "train_detector: empty dataset");
  check(std::is_sorted(class_set.begin(), class_set.end()),
        "train_detector: class set must be sorted");
  check(cfg.epochs >= 1, "train_detector: epochs must be >= 1");

  std::mt19937_64 rng(cfg.seed);
  DetectorNet net;
  net.geom = cfg.geom;
  net.classes = class_set;
  net.backbone = Backbone(cfg.c_img, rng);
  if (init == DetectorInit::ReuseBackbone) {
    check(reuse_from != nullptr,
          "train_detector: reuse_backbone requires a source backbone");
    check(reuse_from->c_img == cfg.c_img,
          "train_detector: reused backbone width differs from config");
    net.backbone.copy_weights_from(*reuse_from);
  }
  net.head = DetectorHead<float>(cfg.c_img, int(class_set.size()), rng);

  // pre-validate all targets so class errors surface before training
  std::vector<std::vector<LabeledBox>> targets;
  targets.reserve(records.size());
  for (const auto& rec : records)
    targets.push_back(targets_for_record(rec, class_set));

  SgdOptimizer<float> opt(cfg.sgd);
  std::vector<int> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);

  // One replica per batch item; each item's gradients accumulate on its own
  // replica and are reduced into the master in item order, so the summed
  // gradient is bit-identical for any thread count.
  std::vector<DetectorNet> replicas(std::size_t(cfg.batch_size));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum_cls = 0, sum_loc = 0;
    for (std::size_t start = 0; start < order.size();
         start += std::size_t(cfg.batch_size)) {
      const int bsz =
          int(std::min(order.size() - start, std::size_t(cfg.batch_size)));
      for (int i = 0; i < bsz; ++i) {
        auto& rep = replicas[i];
        if (rep.backbone.c_img != net.backbone.c_img ||
            rep.head.num_classes != net.head.num_classes) {
          rep.backbone = net.backbone;
          rep.head = net.head;
        } else {
          rep.backbone.copy_weights_from(net.backbone);
          rep.head.copy_weights_from(net.head);
        }
        rep.backbone.zero_grad();
        rep.head.zero_grad();
      }
      std::vector<double> cls_i(bsz), loc_i(bsz);
      const float inv_b = 1.f / float(bsz);
      parallel_for(bsz, cfg.threads, [&](int i) {
        const ImageRecord& rec = records[order[start + i]];
        DetectorNet& n = replicas[i];
        Backbone::Cache bcache;
        const Image img = load_image(rec);
        TensorF in = image_to_tensor<float>(img);
        TensorF feat = n.backbone.forward(in, bcache);
        DetectorHead<float>::Cache hcache;
        TensorF out = n.head.forward(feat, hcache);
        auto loss = detection_loss(out, targets[order[start + i]], cfg.geom,
                                   n.head.num_classes);
        check(std::isfinite(loss.l_cls) && std::isfinite(loss.l_loc),
              "train_detector: non-finite loss at epoch " +
                  std::to_string(epoch) + ", image '" + rec.image_id + "'");
        cls_i[i] = loss.l_cls;
        loc_i[i] = loss.l_loc;
        for (auto& g : loss.grad.v) g *= inv_b;
        TensorF gfeat = n.head.backward(hcache, loss.grad);
        if (!cfg.freeze_backbone) n.backbone.backward(bcache, std::move(gfeat));
      });
      net.backbone.zero_grad();
      net.head.zero_grad();
      auto master_b = net.backbone.params();
      auto master_h = net.head.params();
      for (int i = 0; i < bsz; ++i) {
        sum_cls += cls_i[i];
        sum_loc += loc_i[i];
        auto rb = replicas[i].backbone.params();
        auto rh = replicas[i].head.params();
        if (!cfg.freeze_backbone) accumulate_grads(master_b, rb);
        accumulate_grads(master_h, rh);
      }
      auto params = net.head.params();
      if (!cfg.freeze_backbone) {
        auto bp = net.backbone.params();
        params.insert(params.end(), bp.begin(), bp.end());
      }
      opt.step(params);
    }
    if (trace)
      trace->push_back({sum_cls / double(order.size()),
                        sum_loc / double(order.size())});
  }
  return net;
}

std::vector<Detection> non_max_suppression(std::vector<Detection> dets,
                                           double nms_iou) {
  std::sort(dets.begin(), dets.end(), [](const Detection& a,
                                         const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.object_class != b.object_class) return a.object_class < b.object_class;
    return std::tuple(a.box.x_min, a.box.y_min, a.box.x_max, a.box.y_max) <
           std::tuple(b.box.x_min, b.box.y_min, b.box.x_max, b.box.y_max);
  });
  std::vector<Detection> kept;
  for (const auto& d : dets) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (k.object_class != d.object_class) continue;
      if (iou(k.box, d.box) > nms_iou) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> detect(const Image& image, const DetectorNet& net,
                              double score_threshold, double nms_iou) {
  check(net.head.num_classes == int(net.classes.size()) &&
            net.head.num_classes > 0,
        "detect: detector class set does not match the head");
  Backbone::Cache bcache;
  TensorF in = image_to_tensor<float>(image);
  TensorF feat = net.backbone.forward(in, bcache);
  DetectorHead<float>::Cache hcache;
  TensorF out = net.head.forward(feat, hcache);
  check(out.h == net.geom.grid.height && out.w == net.geom.grid.width,
        "detect: head output does not match the configured grid");

  const int kc = net.head.num_classes + 1;
  std::vector<Detection> cands;
  std::vector<double> prob(std::size_t(kc));
  for (int r = 0; r < out.h; ++r)
    for (int c = 0; c < out.w; ++c) {
      double zmax = out.at(0, r, c);
      for (int k = 1; k < kc; ++k) zmax = std::max(zmax, double(out.at(k, r, c)));
      double zsum = 0;
      for (int k = 0; k < kc; ++k) {
        prob[k] = std::exp(double(out.at(k, r, c)) - zmax);
        zsum += prob[k];
      }
      for (int k = 0; k < kc; ++k) prob[k] /= zsum;
      for (int k = 0; k < net.head.num_classes; ++k) {
        if (!(prob[k] > score_threshold)) continue;
        const double tx = out.at(kc + 0, r, c), ty = out.at(kc + 1, r, c);
        const double tw = std::clamp(double(out.at(kc + 2, r, c)), -4.0, 4.0);
        const double th = std::clamp(double(out.at(kc + 3, r, c)), -4.0, 4.0);
        const double cx = net.geom.cell_center_x(c) + tx * net.geom.anchor_px;
        const double cy = net.geom.cell_center_y(r) + ty * net.geom.anchor_px;
        const double w = net.geom.anchor_px * std::exp(tw);
        const double h = net.geom.anchor_px * std::exp(th);
        BoundingBox box{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
        box = box.clipped(image.dims());
        if (box.area() <= 0) continue;
        cands.push_back({net.classes[k], prob[k], box});
      }
    }
  return non_max_suppression(std::move(cands), nms_iou);
}

}  // namespace hoidet
