#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hoidet/annotations.hpp"
#include "hoidet/image.hpp"
#include "hoidet/nn.hpp"
#include "hoidet/tensor.hpp"

namespace hoidet {

inline constexpr int kVerbDim = 25;
inline constexpr int kBackboneStride = 8;

enum class FeatureKind { Image = 0, Pose = 1, Verb = 2 };

// Which of the three feature families feed the attention network. Inactive
// families still occupy their channel slots (zero-filled), so the network
// shape is identical across every combination.
struct FeatureSet {
  bool image = true, pose = true, verb = true;

  bool any() const { return image || pose || verb; }
  bool active(FeatureKind k) const {
    switch (k) {
      case FeatureKind::Image: return image;
      case FeatureKind::Pose: return pose;
      case FeatureKind::Verb: return verb;
    }
    return false;
  }
  bool operator==(const FeatureSet&) const = default;
};

FeatureSet feature_set_from_names(const std::vector<std::string>& names);
std::vector<std::string> feature_set_names(const FeatureSet& set);
std::string feature_set_label(const FeatureSet& set);  // e.g. "I+P+V"

struct FeatureGrid {
  FeatureKind kind = FeatureKind::Image;
  TensorF values;
};

struct FeatureVolume {
  TensorF values;
  FeatureSet provenance;
};

// Word-embedding lookup. File layout: one token per line followed by 25
// decimal numbers, space separated.
class EmbeddingTable {
 public:
  using Vector = std::array<float, kVerbDim>;

  static EmbeddingTable load(const std::filesystem::path& path);
  static void save(const std::map<std::string, Vector>& rows,
                   const std::filesystem::path& path);

  void insert(const std::string& token, const Vector& vec);
  bool contains(const std::string& token) const;
  const Vector& row(const std::string& token) const;  // throws if absent
  std::size_t size() const { return rows_.size(); }

 private:
  std::map<std::string, Vector> rows_;
};

// Looks up a verb; multiword verbs ("sit_on", "sit on") embed each word and
// average. Unknown words raise rather than returning a silent zero vector.
EmbeddingTable::Vector embed_verb(const std::string& verb,
                                  const EmbeddingTable& table);

// Copies the verb vector to every spatial position: 25 -> 25 x H x W.
FeatureGrid broadcast_verb(const EmbeddingTable::Vector& vec, Dims grid);

// Renders one peak-1 Gaussian bump per present joint, centered on the grid
// cell containing the keypoint; absent joints give all-zero channels.
// sigma is measured in grid cells.
FeatureGrid render_pose_heatmaps(const Keypoints& keypoints, Dims image,
                                 Dims grid, double sigma);

// Five stride-8 conv layers mapping 3 x S x S to c_img x S/8 x S/8.
template <typename T>
struct BackboneNet {
  int c_img = 64;
  std::array<ConvLayer<T>, 5> conv;

  struct Cache {
    Tensor3<T> in;
    std::array<Tensor3<T>, 5> act;  // post-relu outputs
    const Tensor3<T>& out() const { return act[4]; }
  };

  BackboneNet() = default;
  explicit BackboneNet(int c_img_, std::mt19937_64& rng) : c_img(c_img_) {
    check(c_img % 4 == 0, "backbone: c_img must be divisible by 4");
    const int widths[5] = {c_img / 4, c_img / 2, c_img / 2, c_img, c_img};
    const int strides[5] = {2, 2, 1, 2, 1};
    int in_c = 3;
    for (int i = 0; i < 5; ++i) {
      conv[i] = ConvLayer<T>(in_c, widths[i], 3, strides[i], 1);
      conv[i].init(rng);
      in_c = widths[i];
    }
  }

  Tensor3<T> forward(const Tensor3<T>& img, Cache& cache) const {
    check(img.c == 3, "backbone: expected a 3-channel input");
    check(img.h % kBackboneStride == 0 && img.w % kBackboneStride == 0,
          "backbone: input dims must be a multiple of " +
              std::to_string(kBackboneStride));
    cache.in = img;
    const Tensor3<T>* x = &cache.in;
    for (int i = 0; i < 5; ++i) {
      cache.act[i] = conv[i].forward(*x);
      relu_inplace(cache.act[i]);
      x = &cache.act[i];
    }
    return cache.out();
  }

  void backward(const Cache& cache, Tensor3<T> grad_out) {
    for (int i = 4; i >= 0; --i) {
      relu_backward_inplace(grad_out, cache.act[i]);
      const Tensor3<T>& input = i == 0 ? cache.in : cache.act[i - 1];
      grad_out = conv[i].backward(input, grad_out, i > 0);
    }
  }

  void zero_grad() {
    for (auto& c : conv) c.zero_grad();
  }

  std::vector<ParamView<T>> params() {
    std::vector<ParamView<T>> out;
    for (int i = 0; i < 5; ++i)
      conv[i].params("backbone.conv" + std::to_string(i + 1), out);
    return out;
  }

  void copy_weights_from(const BackboneNet& other) {
    for (int i = 0; i < 5; ++i) {
      conv[i].w = other.conv[i].w;
      conv[i].b = other.conv[i].b;
    }
  }
};

using Backbone = BackboneNet<float>;

// Converts an RGB image to the normalized network input in [-1, 1].
template <typename T>
Tensor3<T> image_to_tensor(const Image& img) {
  Tensor3<T> t(3, img.height, img.width);
  const std::uint8_t* p = img.rgb.data();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        t.at(c, y, x) = (T(*p++) - T(127.5)) / T(127.5);
  return t;
}

// Runs the backbone; output is c_img x (S/8) x (S/8), deterministic given
// the parameters.
FeatureGrid extract_image_features(const Image& image, const Backbone& net,
                                   Backbone::Cache& cache);

struct FuseSpec {
  int c_img = 64;
  Dims grid;
};

// Channel-wise concatenation in fixed order (image, pose, verb). Inactive
// kinds contribute zero-filled channels of their nominal width; grids for
// inactive kinds may be null.
FeatureVolume fuse(const FeatureGrid* image, const FeatureGrid* pose,
                   const FeatureGrid* verb, const FeatureSet& active,
                   const FuseSpec& spec);

inline int fused_channels(int c_img) { return c_img + kPoseJoints + kVerbDim; }

}  // namespace hoidet
