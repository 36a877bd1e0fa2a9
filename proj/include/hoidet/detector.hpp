#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hoidet/annotations.hpp"
#include "hoidet/features.hpp"
#include "hoidet/nn.hpp"

namespace hoidet {

struct Detection {
  std::string object_class;
  double score = 0;
  BoundingBox box;
};

struct LabeledBox {
  int class_index = 0;
  BoundingBox box;
};

// Grid geometry shared by the detection head and the box codec: one anchor
// of size anchor_px per cell, offsets (dx, dy) in anchor units and
// (log w, log h) against the anchor.
struct DetGeom {
  Dims image;
  Dims grid;
  double anchor_px = 64;

  double cell_w() const { return double(image.width) / grid.width; }
  double cell_h() const { return double(image.height) / grid.height; }
  double cell_center_x(int c) const { return (c + 0.5) * cell_w(); }
  double cell_center_y(int r) const { return (r + 0.5) * cell_h(); }
};

// Per-cell class logits (num_classes + 1, background last) plus 4 box
// offsets, predicted from the shared backbone feature map.
template <typename T>
struct DetectorHead {
  int num_classes = 0;
  ConvLayer<T> conv1, conv2;

  DetectorHead() = default;
  DetectorHead(int c_img, int num_classes_, std::mt19937_64& rng)
      : num_classes(num_classes_) {
    check(num_classes >= 1, "detector head: need at least one class");
    conv1 = ConvLayer<T>(c_img, 64, 3, 1, 1);
    conv2 = ConvLayer<T>(64, num_classes + 5, 1, 1, 0);
    conv1.init(rng);
    conv2.init(rng);
  }

  struct Cache {
    Tensor3<T> in, a1, out;
  };

  Tensor3<T> forward(const Tensor3<T>& features, Cache& c) const {
    c.in = features;
    c.a1 = conv1.forward(c.in);
    relu_inplace(c.a1);
    c.out = conv2.forward(c.a1);
    return c.out;
  }

  // Accumulates parameter grads; returns dLoss/d(features).
  Tensor3<T> backward(const Cache& c, const Tensor3<T>& grad_out) {
    Tensor3<T> g = conv2.backward(c.a1, grad_out);
    relu_backward_inplace(g, c.a1);
    return conv1.backward(c.in, g);
  }

  void zero_grad() {
    conv1.zero_grad();
    conv2.zero_grad();
  }

  std::vector<ParamView<T>> params() {
    std::vector<ParamView<T>> out;
    conv1.params("head.conv1", out);
    conv2.params("head.conv2", out);
    return out;
  }

  void copy_weights_from(const DetectorHead& other) {
    conv1.w = other.conv1.w;
    conv1.b = other.conv1.b;
    conv2.w = other.conv2.w;
    conv2.b = other.conv2.b;
  }
};

// Full detector: shared backbone + head + the class list the head indexes.
struct DetectorNet {
  Backbone backbone;
  DetectorHead<float> head;
  std::vector<std::string> classes;  // sorted; head channel k = classes[k]
  DetGeom geom;
};

template <typename T>
struct DetectionLossResult {
  T l_cls = T(0);
  T l_loc = T(0);
  Tensor3<T> grad;  // d(l_cls + l_loc)/d(head output)
};

// l_cls: mean softmax cross entropy over all cells; a cell is positive for
// the smallest-area target box containing its center, background otherwise.
// l_loc: smooth-L1 over the 4 offsets, mean over positive cells.
template <typename T>
DetectionLossResult<T> detection_loss(const Tensor3<T>& pred,
                                      const std::vector<LabeledBox>& targets,
                                      const DetGeom& geom, int num_classes,
                                      bool want_grad = true);

enum class DetectorInit { Fresh, ReuseBackbone };

struct DetectorTrainConfig {
  DetGeom geom;
  SgdConfig sgd;
  int c_img = 64;
  int batch_size = 4;
  int epochs = 30;
  int threads = 1;
  bool freeze_backbone = false;
  std::uint64_t seed = 0;
};

struct EpochLoss {
  double l_cls = 0;
  double l_loc = 0;
};

// Supervised training on (class, box) labels, real or pseudo. With
// DetectorInit::ReuseBackbone the backbone starts from *reuse_from and the
// head is freshly initialized.
DetectorNet train_detector(
    const std::vector<ImageRecord>& records,
    const std::vector<std::string>& class_set, const DetectorTrainConfig& cfg,
    DetectorInit init, const Backbone* reuse_from,
    const std::function<Image(const ImageRecord&)>& load_image,
    std::vector<EpochLoss>* trace = nullptr);

// Softmax scores per cell, boxes decoded above score_threshold, greedy
// per-class NMS, descending score order.
std::vector<Detection> detect(const Image& image, const DetectorNet& net,
                              double score_threshold, double nms_iou = 0.5);

// NMS over already-decoded detections (exposed for tests).
std::vector<Detection> non_max_suppression(std::vector<Detection> dets,
                                           double nms_iou);

}  // namespace hoidet
