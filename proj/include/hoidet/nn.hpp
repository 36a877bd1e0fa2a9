#pragma once

#include <cmath>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "hoidet/tensor.hpp"
#include "hoidet/util.hpp"

namespace hoidet {

// Named view onto one parameter tensor and its gradient buffer. Networks
// expose their blocks through this so the optimizer and the checkpoint code
// never need to know the concrete layer types.
template <typename T>
struct ParamView {
  std::string name;
  std::vector<T>* value = nullptr;
  std::vector<T>* grad = nullptr;
  std::vector<int> shape;
};

template <typename T>
struct ConvLayer {
  int in_c = 0, out_c = 0, k = 3, stride = 1, pad = 1;
  std::vector<T> w;   // out_c * in_c * k * k
  std::vector<T> b;   // out_c
  std::vector<T> gw;
  std::vector<T> gb;

  ConvLayer() = default;
  ConvLayer(int in_c_, int out_c_, int k_, int stride_, int pad_)
      : in_c(in_c_), out_c(out_c_), k(k_), stride(stride_), pad(pad_),
        w(std::size_t(out_c_) * in_c_ * k_ * k_, T(0)),
        b(out_c_, T(0)),
        gw(w.size(), T(0)),
        gb(out_c_, T(0)) {}

  // Fan-in scaled uniform init, biases zero.
  void init(std::mt19937_64& rng) {
    const double fan_in = double(in_c) * k * k;
    const double limit = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& x : w) x = T(dist(rng));
    for (auto& x : b) x = T(0);
  }

  int out_h(int in_h) const { return (in_h + 2 * pad - k) / stride + 1; }
  int out_w(int in_w) const { return (in_w + 2 * pad - k) / stride + 1; }

  Tensor3<T> forward(const Tensor3<T>& in) const {
    check(in.c == in_c, "conv: input has " + std::to_string(in.c) +
                            " channels, layer expects " +
                            std::to_string(in_c));
    Tensor3<T> out(out_c, out_h(in.h), out_w(in.w));
    for (int oc = 0; oc < out_c; ++oc) {
      T* op = out.plane(oc);
      const T bias = b[oc];
      for (std::size_t i = 0; i < std::size_t(out.h) * out.w; ++i) op[i] = bias;
    }
    const T* wbase = w.data();
    for (int oc = 0; oc < out_c; ++oc) {
      T* op = out.plane(oc);
      for (int ic = 0; ic < in_c; ++ic) {
        const T* ip = in.plane(ic);
        const T* wrow = wbase + (std::size_t(oc) * in_c + ic) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const T wv = wrow[ky * k + kx];
            if (wv == T(0)) continue;
            // valid output x range for this kernel tap
            int ox0, ox1, oy0, oy1;
            tap_range(kx, in.w, out.w, ox0, ox1);
            tap_range(ky, in.h, out.h, oy0, oy1);
            for (int oy = oy0; oy < oy1; ++oy) {
              const int iy = oy * stride + ky - pad;
              const T* irow = ip + std::size_t(iy) * in.w + (kx - pad);
              T* orow = op + std::size_t(oy) * out.w;
              if (stride == 1) {
                for (int ox = ox0; ox < ox1; ++ox) orow[ox] += wv * irow[ox];
              } else {
                for (int ox = ox0; ox < ox1; ++ox)
                  orow[ox] += wv * irow[std::size_t(ox) * stride];
              }
            }
          }
        }
      }
    }
    return out;
  }

  // Accumulates gw/gb; returns grad wrt input when want_grad_in.
  Tensor3<T> backward(const Tensor3<T>& in, const Tensor3<T>& grad_out,
                      bool want_grad_in = true) {
    check(in.c == in_c && grad_out.c == out_c, "conv backward: shape mismatch");
    Tensor3<T> grad_in;
    if (want_grad_in) grad_in = Tensor3<T>(in.c, in.h, in.w);
    for (int oc = 0; oc < out_c; ++oc) {
      const T* gp = grad_out.plane(oc);
      T acc = T(0);
      for (std::size_t i = 0; i < std::size_t(grad_out.h) * grad_out.w; ++i)
        acc += gp[i];
      gb[oc] += acc;
    }
    for (int oc = 0; oc < out_c; ++oc) {
      const T* gp = grad_out.plane(oc);
      for (int ic = 0; ic < in_c; ++ic) {
        const T* ip = in.plane(ic);
        T* gip = want_grad_in ? grad_in.plane(ic) : nullptr;
        T* gwrow = gw.data() + (std::size_t(oc) * in_c + ic) * k * k;
        const T* wrow = w.data() + (std::size_t(oc) * in_c + ic) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            int ox0, ox1, oy0, oy1;
            tap_range(kx, in.w, grad_out.w, ox0, ox1);
            tap_range(ky, in.h, grad_out.h, oy0, oy1);
            T wacc = T(0);
            const T wv = wrow[ky * k + kx];
            for (int oy = oy0; oy < oy1; ++oy) {
              const int iy = oy * stride + ky - pad;
              const T* irow = ip + std::size_t(iy) * in.w + (kx - pad);
              const T* grow = gp + std::size_t(oy) * grad_out.w;
              if (stride == 1) {
                for (int ox = ox0; ox < ox1; ++ox) wacc += grow[ox] * irow[ox];
              } else {
                for (int ox = ox0; ox < ox1; ++ox)
                  wacc += grow[ox] * irow[std::size_t(ox) * stride];
              }
              if (want_grad_in) {
                T* girow = gip + std::size_t(iy) * in.w + (kx - pad);
                if (stride == 1) {
                  for (int ox = ox0; ox < ox1; ++ox) girow[ox] += wv * grow[ox];
                } else {
                  for (int ox = ox0; ox < ox1; ++ox)
                    girow[std::size_t(ox) * stride] += wv * grow[ox];
                }
              }
            }
            gwrow[ky * k + kx] += wacc;
          }
        }
      }
    }
    return grad_in;
  }

  void zero_grad() {
    std::fill(gw.begin(), gw.end(), T(0));
    std::fill(gb.begin(), gb.end(), T(0));
  }

  void params(const std::string& prefix, std::vector<ParamView<T>>& out) {
    out.push_back({prefix + ".w", &w, &gw, {out_c, in_c, k, k}});
    out.push_back({prefix + ".b", &b, &gb, {out_c}});
  }

 private:
  void tap_range(int kt, int in_dim, int out_dim, int& o0, int& o1) const {
    // require 0 <= o*stride + kt - pad < in_dim
    o0 = 0;
    while (o0 < out_dim && o0 * stride + kt - pad < 0) ++o0;
    o1 = out_dim;
    while (o1 > o0 && (o1 - 1) * stride + kt - pad >= in_dim) --o1;
  }
};

template <typename T>
inline void relu_inplace(Tensor3<T>& t) {
  for (auto& x : t.v)
    if (x < T(0)) x = T(0);
}

// grad *= (activation > 0); activation is the post-relu output.
template <typename T>
inline void relu_backward_inplace(Tensor3<T>& grad, const Tensor3<T>& act) {
  for (std::size_t i = 0; i < grad.v.size(); ++i)
    if (act.v[i] <= T(0)) grad.v[i] = T(0);
}

template <typename T>
inline Tensor3<T> upsample_nearest2(const Tensor3<T>& in) {
  Tensor3<T> out(in.c, in.h * 2, in.w * 2);
  for (int c = 0; c < in.c; ++c) {
    const T* ip = in.plane(c);
    T* op = out.plane(c);
    for (int y = 0; y < out.h; ++y) {
      const T* irow = ip + std::size_t(y / 2) * in.w;
      T* orow = op + std::size_t(y) * out.w;
      for (int x = 0; x < out.w; ++x) orow[x] = irow[x / 2];
    }
  }
  return out;
}

template <typename T>
inline Tensor3<T> upsample_nearest2_backward(const Tensor3<T>& grad_out,
                                             int in_h, int in_w) {
  Tensor3<T> grad_in(grad_out.c, in_h, in_w);
  for (int c = 0; c < grad_out.c; ++c) {
    const T* gp = grad_out.plane(c);
    T* gip = grad_in.plane(c);
    for (int y = 0; y < grad_out.h; ++y)
      for (int x = 0; x < grad_out.w; ++x)
        gip[std::size_t(y / 2) * in_w + x / 2] += gp[std::size_t(y) * grad_out.w + x];
  }
  return grad_in;
}

template <typename T>
inline Tensor3<T> concat_channels(const Tensor3<T>& a, const Tensor3<T>& b) {
  check(a.h == b.h && a.w == b.w, "concat: spatial dims differ");
  Tensor3<T> out(a.c + b.c, a.h, a.w);
  std::memcpy(out.v.data(), a.v.data(), a.size() * sizeof(T));
  std::memcpy(out.v.data() + a.size(), b.v.data(), b.size() * sizeof(T));
  return out;
}

template <typename T>
inline void split_channels_backward(const Tensor3<T>& grad, int a_c,
                                    Tensor3<T>& grad_a, Tensor3<T>& grad_b) {
  grad_a = Tensor3<T>(a_c, grad.h, grad.w);
  grad_b = Tensor3<T>(grad.c - a_c, grad.h, grad.w);
  std::memcpy(grad_a.v.data(), grad.v.data(), grad_a.size() * sizeof(T));
  std::memcpy(grad_b.v.data(), grad.v.data() + grad_a.size(),
              grad_b.size() * sizeof(T));
}

template <typename T>
inline T sigmoid(T z) {
  return z >= T(0) ? T(1) / (T(1) + std::exp(-z))
                   : std::exp(z) / (T(1) + std::exp(z));
}

struct SgdConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

// Classic momentum SGD: v <- mu*v + (g + wd*w); w <- w - lr*v.
template <typename T>
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig cfg = {}) : cfg_(cfg) {}

  const SgdConfig& config() const { return cfg_; }

  void step(std::vector<ParamView<T>>& params) {
    if (velocity_.empty()) {
      for (auto& p : params) velocity_.emplace_back(p.value->size(), T(0));
    }
    check(velocity_.size() == params.size(), "sgd: parameter set changed");
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& w = *params[i].value;
      auto& g = *params[i].grad;
      auto& v = velocity_[i];
      check(v.size() == w.size(), "sgd: parameter shape changed");
      const T lr = T(cfg_.lr), mu = T(cfg_.momentum), wd = T(cfg_.weight_decay);
      for (std::size_t j = 0; j < w.size(); ++j) {
        v[j] = mu * v[j] + (g[j] + wd * w[j]);
        w[j] -= lr * v[j];
      }
    }
  }

 private:
  SgdConfig cfg_;
  std::vector<std::vector<T>> velocity_;
};

template <typename T>
inline void zero_grads(std::vector<ParamView<T>>& params) {
  for (auto& p : params) std::fill(p.grad->begin(), p.grad->end(), T(0));
}

// Sums `src` gradients into `dst` (same parameter layout), used when batch
// items are processed on worker copies and reduced in fixed order.
template <typename T>
inline void accumulate_grads(std::vector<ParamView<T>>& dst,
                             const std::vector<ParamView<T>>& src,
                             T scale = T(1)) {
  check(dst.size() == src.size(), "grad accumulate: layout mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    auto& d = *dst[i].grad;
    const auto& s = *src[i].grad;
    check(d.size() == s.size(), "grad accumulate: size mismatch");
    for (std::size_t j = 0; j < d.size(); ++j) d[j] += scale * s[j];
  }
}

}  // namespace hoidet
