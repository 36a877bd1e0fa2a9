#include "hoidet/rrpn.hpp"

#include <cmath>

#include "hoidet/util.hpp"

namespace hoidet {

GaussianProfile gaussian_profile(const BoundingBox& box, Dims image,
                                 Dims grid) {
  check(box.ordered() && box.inside(image),
        "gaussian_target: box must lie inside the image");
  check(box.width() > 0 && box.height() > 0,
        "gaussian_target: degenerate (zero-width or zero-height) box");
  check(grid.width > 0 && grid.height > 0, "gaussian_target: empty grid");
  const double sx = double(image.width) / grid.width;
  const double sy = double(image.height) / grid.height;
  GaussianProfile p;
  p.cx = std::min(double(grid.width - 1), std::floor(box.center_x() / sx));
  p.cy = std::min(double(grid.height - 1), std::floor(box.center_y() / sy));
  p.sigma_x = box.width() / 4.0 / sx;
  p.sigma_y = box.height() / 4.0 / sy;
  return p;
}

TargetMap gaussian_target(const BoundingBox& box, Dims image, Dims grid) {
  const GaussianProfile p = gaussian_profile(box, image, grid);
  TargetMap map(grid.height, grid.width);
  for (int r = 0; r < grid.height; ++r)
    for (int c = 0; c < grid.width; ++c)
      map.at(r, c) = float(p.value_at(double(c), double(r)));
  return map;
}

double total_loss(double det_loss, double att_loss, double lambda) {
  check(std::isfinite(det_loss) && std::isfinite(att_loss),
        "total_loss: non-finite loss input");
  check(lambda >= 0, "total_loss: lambda must be >= 0");
  return det_loss + lambda * att_loss;
}

float train_rrpn_step(const std::vector<RrpnTrainSample>& batch, Rrpn& net,
                      SgdOptimizer<float>& opt, double lambda) {
  check(!batch.empty(), "train_rrpn_step: empty batch");
  check(lambda >= 0, "train_rrpn_step: lambda must be >= 0");

  float mean_loss = 0.f;
  net.zero_grad();
  const float scale = float(lambda / batch.size());
  for (const auto& sample : batch) {
    Rrpn::Cache cache;
    AttentionMap pred = net.forward(sample.volume.values, cache);
    AttentionMap grad;
    const float loss = attention_loss(pred, sample.target, &grad);
    check(std::isfinite(loss),
          "train_rrpn_step: non-finite attention loss (batch of " +
              std::to_string(batch.size()) + " volumes)");
    mean_loss += loss / float(batch.size());
    if (lambda > 0) {
      for (auto& g : grad.v) g *= scale;
      net.backward(cache, grad);
    }
  }
  if (lambda > 0) {
    auto params = net.params();
    opt.step(params);
  }
  return mean_loss;
}

}  // namespace hoidet
