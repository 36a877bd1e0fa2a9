#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hoidet/geometry.hpp"

namespace hoidet {

struct Color {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Color&) const = default;
};

// Interleaved 8-bit RGB raster.
struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h, Color fill = {255, 255, 255});

  Dims dims() const { return {width, height}; }
  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  void set(int x, int y, Color c);
  Color get(int x, int y) const;
};

// Uncompressed 24-bit BMP; the synthetic-world generator writes these and the
// pipeline reads them back, so writer output must be byte-stable.
void write_bmp(const Image& img, const std::filesystem::path& path);
Image read_bmp(const std::filesystem::path& path);

// Drawing helpers (all clip to the image).
void draw_disk(Image& img, double cx, double cy, double radius, Color c);
void draw_line(Image& img, double x0, double y0, double x1, double y1,
               Color c, double thickness = 1.0);
void fill_rect(Image& img, double x0, double y0, double x1, double y1, Color c);
void draw_rect_outline(Image& img, const BoundingBox& box, Color c,
                       int thickness = 1);
void fill_triangle(Image& img, double x0, double y0, double x1, double y1,
                   double x2, double y2, Color c);

}  // namespace hoidet
