#pragma once

#include <cmath>
#include <vector>

#include "hoidet/features.hpp"
#include "hoidet/geometry.hpp"
#include "hoidet/nn.hpp"
#include "hoidet/tensor.hpp"

namespace hoidet {

inline constexpr double kBceEps = 1e-7;

// Relational region proposal network. An encoder produces two feature maps
// at different spatial scales; each feeds its own decoder; the decoder
// outputs are concatenated and a 1x1 conv + sigmoid yields the attention map.
//
//   encoder   3 convs: full-scale tap after conv 2, half-scale tap after the
//             stride-2 conv 3
//   decoder1  5 convs at full scale
//   decoder2  3 convs at half scale, nearest-neighbor x2, then 3 convs
//   head      1x1 conv (64 -> 1) + sigmoid
template <typename T>
struct RrpnNet {
  int in_channels = 0;

  ConvLayer<T> enc1, enc2, enc3;
  std::array<ConvLayer<T>, 5> dec1;
  std::array<ConvLayer<T>, 6> dec2;
  ConvLayer<T> att;

  RrpnNet() = default;
  RrpnNet(int in_channels_, std::mt19937_64& rng)
      : in_channels(in_channels_) {
    enc1 = ConvLayer<T>(in_channels, 64, 3, 1, 1);
    enc2 = ConvLayer<T>(64, 64, 3, 1, 1);
    enc3 = ConvLayer<T>(64, 96, 3, 2, 1);
    const int d1[6] = {64, 64, 64, 48, 32, 32};
    for (int i = 0; i < 5; ++i) dec1[i] = ConvLayer<T>(d1[i], d1[i + 1], 3, 1, 1);
    const int d2[7] = {96, 64, 64, 48, 32, 32, 32};
    for (int i = 0; i < 6; ++i) dec2[i] = ConvLayer<T>(d2[i], d2[i + 1], 3, 1, 1);
    att = ConvLayer<T>(64, 1, 1, 1, 0);
    for (ConvLayer<T>* c : layers()) c->init(rng);
  }

  struct Cache {
    Tensor3<T> in;
    Tensor3<T> e1, e2, e3;                  // post-relu encoder activations
    std::array<Tensor3<T>, 5> d1;           // post-relu decoder1 activations
    std::array<Tensor3<T>, 6> d2;           // post-relu decoder2 activations
    Tensor3<T> d2_up;                       // upsampled tap inside decoder2
    Tensor3<T> cat;                         // dec1 out ++ dec2 out
    Tensor3<T> logits;                      // pre-sigmoid head output
    AttentionMapT<T> out;
  };

  AttentionMapT<T> forward(const Tensor3<T>& volume, Cache& c) const {
    check(volume.c == in_channels,
          "rrpn: volume has " + std::to_string(volume.c) +
              " channels, network expects " + std::to_string(in_channels));
    check(volume.h % 2 == 0 && volume.w % 2 == 0,
          "rrpn: grid dims must be even");
    c.in = volume;
    c.e1 = enc1.forward(c.in); relu_inplace(c.e1);
    c.e2 = enc2.forward(c.e1); relu_inplace(c.e2);
    c.e3 = enc3.forward(c.e2); relu_inplace(c.e3);

    const Tensor3<T>* x = &c.e2;
    for (int i = 0; i < 5; ++i) {
      c.d1[i] = dec1[i].forward(*x);
      relu_inplace(c.d1[i]);
      x = &c.d1[i];
    }

    x = &c.e3;
    for (int i = 0; i < 3; ++i) {
      c.d2[i] = dec2[i].forward(*x);
      relu_inplace(c.d2[i]);
      x = &c.d2[i];
    }
    c.d2_up = upsample_nearest2(c.d2[2]);
    x = &c.d2_up;
    for (int i = 3; i < 6; ++i) {
      c.d2[i] = dec2[i].forward(*x);
      relu_inplace(c.d2[i]);
      x = &c.d2[i];
    }

    c.cat = concat_channels(c.d1[4], c.d2[5]);
    c.logits = att.forward(c.cat);

    c.out = AttentionMapT<T>(volume.h, volume.w);
    for (std::size_t i = 0; i < c.out.v.size(); ++i)
      c.out.v[i] = sigmoid(c.logits.v[i]);
    return c.out;
  }

  // grad_map: dLoss/d(attention map). Accumulates parameter grads and
  // returns dLoss/d(volume).
  Tensor3<T> backward(const Cache& c, const AttentionMapT<T>& grad_map) {
    Tensor3<T> g(1, c.out.h, c.out.w);
    for (std::size_t i = 0; i < g.v.size(); ++i) {
      const T p = c.out.v[i];
      g.v[i] = grad_map.v[i] * p * (T(1) - p);
    }
    Tensor3<T> gcat = att.backward(c.cat, g);
    Tensor3<T> gd1, gd2;
    split_channels_backward(gcat, c.d1[4].c, gd1, gd2);

    for (int i = 5; i >= 3; --i) {
      relu_backward_inplace(gd2, c.d2[i]);
      const Tensor3<T>& input = i == 3 ? c.d2_up : c.d2[i - 1];
      gd2 = dec2[i].backward(input, gd2);
    }
    gd2 = upsample_nearest2_backward(gd2, c.d2[2].h, c.d2[2].w);
    for (int i = 2; i >= 0; --i) {
      relu_backward_inplace(gd2, c.d2[i]);
      const Tensor3<T>& input = i == 0 ? c.e3 : c.d2[i - 1];
      gd2 = dec2[i].backward(input, gd2);
    }

    for (int i = 4; i >= 0; --i) {
      relu_backward_inplace(gd1, c.d1[i]);
      const Tensor3<T>& input = i == 0 ? c.e2 : c.d1[i - 1];
      gd1 = dec1[i].backward(input, gd1);
    }

    // gd2 now holds dLoss/d(e3 post-relu); gd1 holds dLoss/d(e2 post-relu)
    relu_backward_inplace(gd2, c.e3);
    Tensor3<T> ge2 = enc3.backward(c.e2, gd2);
    for (std::size_t i = 0; i < ge2.v.size(); ++i) ge2.v[i] += gd1.v[i];
    relu_backward_inplace(ge2, c.e2);
    Tensor3<T> ge1 = enc2.backward(c.e1, ge2);
    relu_backward_inplace(ge1, c.e1);
    return enc1.backward(c.in, ge1);
  }

  std::vector<ConvLayer<T>*> layers() {
    std::vector<ConvLayer<T>*> out = {&enc1, &enc2, &enc3};
    for (auto& c : dec1) out.push_back(&c);
    for (auto& c : dec2) out.push_back(&c);
    out.push_back(&att);
    return out;
  }

  void zero_grad() {
    for (ConvLayer<T>* c : layers()) c->zero_grad();
  }

  std::vector<ParamView<T>> params() {
    std::vector<ParamView<T>> out;
    enc1.params("rrpn.enc1", out);
    enc2.params("rrpn.enc2", out);
    enc3.params("rrpn.enc3", out);
    for (int i = 0; i < 5; ++i)
      dec1[i].params("rrpn.dec1." + std::to_string(i + 1), out);
    for (int i = 0; i < 6; ++i)
      dec2[i].params("rrpn.dec2." + std::to_string(i + 1), out);
    att.params("rrpn.att", out);
    return out;
  }

  void copy_weights_from(const RrpnNet& other) {
    auto dst = layers();
    auto src = const_cast<RrpnNet&>(other).layers();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i]->w = src[i]->w;
      dst[i]->b = src[i]->b;
    }
  }
};

using Rrpn = RrpnNet<float>;

template <typename T>
AttentionMapT<T> rrpn_forward(const Tensor3<T>& volume, const RrpnNet<T>& net) {
  typename RrpnNet<T>::Cache cache;
  return net.forward(volume, cache);
}

// Separable Gaussian in grid-cell coordinates, peak 1 at (cx, cy).
struct GaussianProfile {
  double cx = 0, cy = 0;    // cell indices of the peak
  double sigma_x = 1, sigma_y = 1;
  double value_at(double x, double y) const {
    const double dx = (x - cx) / sigma_x, dy = (y - cy) / sigma_y;
    return std::exp(-0.5 * (dx * dx + dy * dy));
  }
};

// Profile used as the attention training target for a box: peak at the grid
// cell containing the box center, sigma = quarter box extent per axis
// (converted to grid units).
GaussianProfile gaussian_profile(const BoundingBox& box, Dims image, Dims grid);

TargetMap gaussian_target(const BoundingBox& box, Dims image, Dims grid);

// Mean pixel-wise binary cross entropy with predictions clamped away from
// {0,1}. grad (when requested) is dLoss/d(pred).
template <typename T>
T attention_loss(const AttentionMapT<T>& pred, const Grid2<T>& target,
                 AttentionMapT<T>* grad = nullptr) {
  check(pred.same_shape(target), "attention_loss: dimension mismatch");
  check(pred.size() > 0, "attention_loss: empty map");
  const T eps = T(kBceEps);
  const T lo = eps, hi = T(1) - eps;
  T total = T(0);
  if (grad) *grad = AttentionMapT<T>(pred.h, pred.w);
  const T inv_n = T(1) / T(pred.size());
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    const T p_raw = pred.v[i];
    const T p = std::min(hi, std::max(lo, p_raw));
    const T t = target.v[i];
    total += -(t * std::log(p) + (T(1) - t) * std::log(T(1) - p));
    if (grad) {
      const bool clamped = p_raw < lo || p_raw > hi;
      (*grad).v[i] = clamped ? T(0) : (-t / p + (T(1) - t) / (T(1) - p)) * inv_n;
    }
  }
  return total * inv_n;
}

// L_total = L_det + lambda * L_att.
double total_loss(double det_loss, double att_loss, double lambda);

struct RrpnTrainSample {
  FeatureVolume volume;
  TargetMap target;
};

// One SGD step on lambda * mean batch BCE, for fixed feature volumes.
// Reports the (unweighted) mean attention loss before the step. lambda = 0
// leaves the parameters untouched.
float train_rrpn_step(const std::vector<RrpnTrainSample>& batch, Rrpn& net,
                      SgdOptimizer<float>& opt, double lambda);

}  // namespace hoidet
