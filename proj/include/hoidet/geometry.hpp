#pragma once

#include <algorithm>
#include <string>

namespace hoidet {

struct Dims {
  int width = 0;
  int height = 0;
  bool operator==(const Dims&) const = default;
};

// Axis-aligned box in image pixel coordinates. Area uses the continuous
// convention width = x_max - x_min, so x_min == x_max is a zero-area box.
struct BoundingBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  bool ordered() const { return x_min <= x_max && y_min <= y_max; }
  bool nonnegative() const { return x_min >= 0 && y_min >= 0; }
  bool inside(const Dims& image) const {
    return nonnegative() && x_max <= image.width && y_max <= image.height;
  }
  bool contains_point(double x, double y) const {
    return x >= x_min && x < x_max && y >= y_min && y < y_max;
  }

  BoundingBox clipped(const Dims& image) const {
    BoundingBox b = *this;
    b.x_min = std::clamp(b.x_min, 0.0, double(image.width));
    b.x_max = std::clamp(b.x_max, 0.0, double(image.width));
    b.y_min = std::clamp(b.y_min, 0.0, double(image.height));
    b.y_max = std::clamp(b.y_max, 0.0, double(image.height));
    return b;
  }

  bool operator==(const BoundingBox&) const = default;
};

// Inclusive cell-index box on the attention grid.
struct GridBox {
  int c_min = 0, r_min = 0, c_max = 0, r_max = 0;
  bool operator==(const GridBox&) const = default;
};

}  // namespace hoidet
