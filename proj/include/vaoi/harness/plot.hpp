#pragma once

// Minimal line plots written as PNG: axes with ticks, one polyline per series
// with an optional shaded band, and a legend. Text uses a built-in 5x7 font.

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "vaoi/error.hpp"

namespace vaoi {

struct Rgb {
  std::uint8_t r, g, b;
};

class Canvas {
 public:
  Canvas(int width, int height, Rgb background = {255, 255, 255})
      : w_(width), h_(height), px_(static_cast<std::size_t>(width) * height * 3) {
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) set(x, y, background);
  }

  int width() const { return w_; }
  int height() const { return h_; }

  void blend(int x, int y, Rgb c, double a = 1.0) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    std::uint8_t* p = &px_[(static_cast<std::size_t>(y) * w_ + x) * 3];
    p[0] = static_cast<std::uint8_t>(std::lround(a * c.r + (1.0 - a) * p[0]));
    p[1] = static_cast<std::uint8_t>(std::lround(a * c.g + (1.0 - a) * p[1]));
    p[2] = static_cast<std::uint8_t>(std::lround(a * c.b + (1.0 - a) * p[2]));
  }

  void set(int x, int y, Rgb c) { blend(x, y, c, 1.0); }

  void fill_rect(int x0, int y0, int x1, int y1, Rgb c, double a = 1.0) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
      for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) blend(x, y, c, a);
  }

  void line(double x0, double y0, double x1, double y1, Rgb c, int thickness = 1) {
    const double len = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
    const int steps = std::max(1, static_cast<int>(std::ceil(len)));
    const int lo = -(thickness - 1) / 2;
    const int hi = thickness / 2;
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
      const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
      for (int dy = lo; dy <= hi; ++dy)
        for (int dx = lo; dx <= hi; ++dx) set(x + dx, y + dy, c);
    }
  }

  /// Fills between two curves sampled at the same x positions.
  void band(const std::vector<double>& xs, const std::vector<double>& lo, const std::vector<double>& hi, Rgb c,
            double a) {
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      const int xa = static_cast<int>(std::lround(xs[i]));
      const int xb = static_cast<int>(std::lround(xs[i + 1]));
      for (int x = xa; x <= xb; ++x) {
        const double t = xb == xa ? 0.0 : static_cast<double>(x - xa) / (xb - xa);
        const double y0 = lo[i] + t * (lo[i + 1] - lo[i]);
        const double y1 = hi[i] + t * (hi[i + 1] - hi[i]);
        for (int y = static_cast<int>(std::lround(std::min(y0, y1))); y <= std::lround(std::max(y0, y1)); ++y)
          blend(x, y, c, a);
      }
    }
  }

  void text(int x, int y, const std::string& s, Rgb c, int scale = 2);

  static int text_width(const std::string& s, int scale = 2) { return static_cast<int>(s.size()) * 6 * scale; }

  void write_png(const std::filesystem::path& path) const {
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw StateError("cannot open '" + path.string() + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      std::fclose(fp);
      throw StateError("libpng failed writing '" + path.string() + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w_), static_cast<png_uint_32>(h_), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h_; ++y)
      png_write_row(png, const_cast<png_bytep>(&px_[static_cast<std::size_t>(y) * w_ * 3]));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
  }

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

namespace detail {

struct Glyph {
  char c;
  std::array<std::uint8_t, 7> rows;
};

// 5x7 bitmaps, bit 4 is the leftmost column. Lowercase renders as uppercase.
inline const std::vector<Glyph>& font() {
  static const std::vector<Glyph> g = {
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'A', {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
      {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}}, {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
      {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}}, {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
      {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}}, {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
      {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}}, {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
      {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
  };
  return g;
}

inline const Glyph* find_glyph(char c) {
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  for (const auto& g : font())
    if (g.c == c) return &g;
  return nullptr;
}

}  // namespace detail

inline void Canvas::text(int x, int y, const std::string& s, Rgb c, int scale) {
  int cx = x;
  for (char ch : s) {
    if (const auto* g = detail::find_glyph(ch)) {
      for (int row = 0; row < 7; ++row)
        for (int col = 0; col < 5; ++col)
          if (g->rows[static_cast<std::size_t>(row)] & (0x10 >> col))
            fill_rect(cx + col * scale, y + row * scale, cx + col * scale + scale - 1, y + row * scale + scale - 1, c);
    }
    cx += 6 * scale;
  }
}

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lo;  // optional band, same length as x
  std::vector<double> hi;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  int width = 900;
  int height = 560;
};

/// Roughly five round tick values spanning [lo, hi].
inline std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  if (!(span > 0.0)) return {lo};
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return ticks;
}

inline std::string tick_label(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

inline void write_line_plot(const PlotSpec& spec, const std::filesystem::path& path) {
  static const Rgb palette[] = {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {148, 103, 189},
                                {255, 127, 14}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127}};
  const Rgb black{0, 0, 0};
  const Rgb grid{225, 225, 225};
  Canvas cv(spec.width, spec.height);
  const int left = 90, right = 200, top = 50, bottom = 70;
  const int px0 = left, px1 = spec.width - right, py0 = top, py1 = spec.height - bottom;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : spec.series) {
    if (s.x.size() != s.y.size()) throw ArgumentError("plot series '" + s.label + "' has mismatched x/y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
      if (!s.lo.empty()) ymin = std::min(ymin, s.lo[i]);
      if (!s.hi.empty()) ymax = std::max(ymax, s.hi[i]);
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = 0.0;
    xmax = 1.0;
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax == xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto sx = [&](double x) { return px0 + (x - xmin) / (xmax - xmin) * (px1 - px0); };
  auto sy = [&](double y) { return py1 - (y - ymin) / (ymax - ymin) * (py1 - py0); };

  for (double t : nice_ticks(ymin, ymax)) {
    const double y = sy(t);
    cv.line(px0, y, px1, y, grid);
    cv.line(px0 - 5, y, px0, y, black);
    const std::string l = tick_label(t);
    cv.text(px0 - 10 - Canvas::text_width(l), static_cast<int>(y) - 7, l, black);
  }
  for (double t : nice_ticks(xmin, xmax)) {
    const double x = sx(t);
    cv.line(x, py0, x, py1, grid);
    cv.line(x, py1, x, py1 + 5, black);
    const std::string l = tick_label(t);
    cv.text(static_cast<int>(x) - Canvas::text_width(l) / 2, py1 + 10, l, black);
  }
  cv.line(px0, py0, px0, py1, black);
  cv.line(px0, py1, px1, py1, black);
  cv.line(px1, py0, px1, py1, black);
  cv.line(px0, py0, px1, py0, black);

  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    const Rgb c = palette[k % std::size(palette)];
    std::vector<double> xs(s.x.size());
    for (std::size_t i = 0; i < s.x.size(); ++i) xs[i] = sx(s.x[i]);
    if (!s.lo.empty() && !s.hi.empty()) {
      std::vector<double> lo(s.x.size()), hi(s.x.size());
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        lo[i] = sy(s.lo[i]);
        hi[i] = sy(s.hi[i]);
      }
      cv.band(xs, lo, hi, c, 0.18);
    }
    for (std::size_t i = 0; i + 1 < s.x.size(); ++i) cv.line(xs[i], sy(s.y[i]), xs[i + 1], sy(s.y[i + 1]), c, 2);
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const int x = static_cast<int>(std::lround(xs[i]));
      const int y = static_cast<int>(std::lround(sy(s.y[i])));
      cv.fill_rect(x - 3, y - 3, x + 3, y + 3, c);
    }
    const int ly = py0 + 10 + static_cast<int>(k) * 24;
    cv.fill_rect(px1 + 15, ly + 4, px1 + 35, ly + 8, c);
    cv.text(px1 + 42, ly, s.label, black);
  }

  cv.text((px0 + px1 - Canvas::text_width(spec.title)) / 2, 15, spec.title, black);
  cv.text((px0 + px1 - Canvas::text_width(spec.x_label)) / 2, spec.height - 30, spec.x_label, black);
  cv.text(10, 15, spec.y_label, black);
  cv.write_png(path);
}

}  // namespace vaoi
