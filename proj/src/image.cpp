#include "hoidet/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "hoidet/util.hpp"

namespace hoidet {

Image::Image(int w, int h, Color fill) : width(w), height(h) {
  check(w > 0 && h > 0, "image: dims must be positive");
  rgb.resize(std::size_t(w) * h * 3);
  for (std::size_t i = 0; i < rgb.size(); i += 3) {
    rgb[i] = fill.r;
    rgb[i + 1] = fill.g;
    rgb[i + 2] = fill.b;
  }
}

void Image::set(int x, int y, Color c) {
  if (!in_bounds(x, y)) return;
  std::size_t i = (std::size_t(y) * width + x) * 3;
  rgb[i] = c.r;
  rgb[i + 1] = c.g;
  rgb[i + 2] = c.b;
}

Color Image::get(int x, int y) const {
  std::size_t i = (std::size_t(y) * width + x) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

}  // namespace

void write_bmp(const Image& img, const std::filesystem::path& path) {
  const int row_bytes = img.width * 3;
  const int pad = (4 - row_bytes % 4) % 4;
  const std::uint32_t data_size = std::uint32_t((row_bytes + pad) * img.height);
  std::vector<std::uint8_t> out;
  out.reserve(54 + data_size);
  out.push_back('B');
  out.push_back('M');
  put_u32(out, 54 + data_size);
  put_u32(out, 0);
  put_u32(out, 54);
  put_u32(out, 40);  // BITMAPINFOHEADER
  put_u32(out, std::uint32_t(img.width));
  put_u32(out, std::uint32_t(img.height));
  put_u16(out, 1);
  put_u16(out, 24);
  put_u32(out, 0);  // BI_RGB
  put_u32(out, data_size);
  put_u32(out, 2835);
  put_u32(out, 2835);
  put_u32(out, 0);
  put_u32(out, 0);
  // bottom-up rows, BGR order
  for (int y = img.height - 1; y >= 0; --y) {
    for (int x = 0; x < img.width; ++x) {
      Color c = img.get(x, y);
      out.push_back(c.b);
      out.push_back(c.g);
      out.push_back(c.r);
    }
    for (int i = 0; i < pad; ++i) out.push_back(0);
  }
  std::ofstream f(path, std::ios::binary);
  check(bool(f), "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()),
          std::streamsize(out.size()));
  check(bool(f), "short write to " + path.string());
}

Image read_bmp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  check(bool(f), "cannot open image file " + path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
  check(buf.size() >= 54 && buf[0] == 'B' && buf[1] == 'M',
        path.string() + ": not a BMP file");
  const std::uint32_t off = get_u32(&buf[10]);
  const std::uint32_t hdr = get_u32(&buf[14]);
  check(hdr >= 40, path.string() + ": unsupported BMP header");
  const std::int32_t w = std::int32_t(get_u32(&buf[18]));
  const std::int32_t h = std::int32_t(get_u32(&buf[22]));
  const std::uint16_t bpp = std::uint16_t(buf[28] | (buf[29] << 8));
  const std::uint32_t comp = get_u32(&buf[30]);
  check(w > 0 && h > 0, path.string() + ": unsupported BMP orientation");
  check(bpp == 24 && comp == 0, path.string() + ": only 24-bit BMP supported");
  const int row_bytes = w * 3;
  const int pad = (4 - row_bytes % 4) % 4;
  check(buf.size() >= off + std::size_t(row_bytes + pad) * h,
        path.string() + ": truncated BMP");
  Image img(w, h);
  const std::uint8_t* p = buf.data() + off;
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      img.set(x, y, {p[2], p[1], p[0]});
      p += 3;
    }
    p += pad;
  }
  return img;
}

void draw_disk(Image& img, double cx, double cy, double radius, Color c) {
  const int x0 = std::max(0, int(std::floor(cx - radius)));
  const int x1 = std::min(img.width - 1, int(std::ceil(cx + radius)));
  const int y0 = std::max(0, int(std::floor(cy - radius)));
  const int y1 = std::min(img.height - 1, int(std::ceil(cy + radius)));
  const double r2 = radius * radius;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r2) img.set(x, y, c);
    }
}

void draw_line(Image& img, double x0, double y0, double x1, double y1,
               Color c, double thickness) {
  const double len = std::hypot(x1 - x0, y1 - y0);
  const int steps = std::max(1, int(std::ceil(len * 2)));
  for (int i = 0; i <= steps; ++i) {
    const double t = double(i) / steps;
    draw_disk(img, x0 + t * (x1 - x0), y0 + t * (y1 - y0), thickness * 0.5, c);
  }
}

void fill_rect(Image& img, double x0, double y0, double x1, double y1,
               Color c) {
  const int ax = std::max(0, int(std::floor(std::min(x0, x1))));
  const int bx = std::min(img.width - 1, int(std::ceil(std::max(x0, x1)) - 1));
  const int ay = std::max(0, int(std::floor(std::min(y0, y1))));
  const int by = std::min(img.height - 1, int(std::ceil(std::max(y0, y1)) - 1));
  for (int y = ay; y <= by; ++y)
    for (int x = ax; x <= bx; ++x) img.set(x, y, c);
}

void draw_rect_outline(Image& img, const BoundingBox& box, Color c,
                       int thickness) {
  for (int t = 0; t < thickness; ++t) {
    const int x0 = int(std::lround(box.x_min)) + t;
    const int x1 = int(std::lround(box.x_max)) - 1 - t;
    const int y0 = int(std::lround(box.y_min)) + t;
    const int y1 = int(std::lround(box.y_max)) - 1 - t;
    for (int x = x0; x <= x1; ++x) {
      img.set(x, y0, c);
      img.set(x, y1, c);
    }
    for (int y = y0; y <= y1; ++y) {
      img.set(x0, y, c);
      img.set(x1, y, c);
    }
  }
}

void fill_triangle(Image& img, double x0, double y0, double x1, double y1,
                   double x2, double y2, Color c) {
  const int ax = std::max(0, int(std::floor(std::min({x0, x1, x2}))));
  const int bx =
      std::min(img.width - 1, int(std::ceil(std::max({x0, x1, x2}))));
  const int ay = std::max(0, int(std::floor(std::min({y0, y1, y2}))));
  const int by =
      std::min(img.height - 1, int(std::ceil(std::max({y0, y1, y2}))));
  auto edge = [](double px, double py, double qx, double qy, double rx,
                 double ry) {
    return (qx - px) * (ry - py) - (qy - py) * (rx - px);
  };
  const double area = edge(x0, y0, x1, y1, x2, y2);
  if (area == 0) return;
  for (int y = ay; y <= by; ++y)
    for (int x = ax; x <= bx; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double w0 = edge(x1, y1, x2, y2, px, py) / area;
      const double w1 = edge(x2, y2, x0, y0, px, py) / area;
      const double w2 = edge(x0, y0, x1, y1, px, py) / area;
      if (w0 >= 0 && w1 >= 0 && w2 >= 0) img.set(x, y, c);
    }
}

}  // namespace hoidet
