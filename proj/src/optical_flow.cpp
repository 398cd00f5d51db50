// Two-frame dense optical flow by polynomial expansion (Farneback).

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "stsnn/errors.hpp"
#include "stsnn/motion_streams.hpp"

namespace stsnn {

namespace {

/// Row-major double image with replicate-border reads.
struct Grid {
  int w = 0;
  int h = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(int width, int height) : w(width), h(height), v(static_cast<std::size_t>(width) * height, 0.0) {}

  double& operator()(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
  double operator()(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
  double clamped(int x, int y) const { return (*this)(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); }

  double bilinear(double x, double y) const {
    x = std::clamp(x, 0.0, w - 1.0);
    y = std::clamp(y, 0.0, h - 1.0);
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const double ax = x - x0, ay = y - y0;
    return (1 - ay) * ((1 - ax) * (*this)(x0, y0) + ax * (*this)(x1, y0)) +
           ay * ((1 - ax) * (*this)(x0, y1) + ax * (*this)(x1, y1));
  }
};

Grid from_plane(const Plane& p, double scale) {
  Grid g(p.width(), p.height());
  for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] = p.values()[i] * scale;
  return g;
}

Grid resize(const Grid& src, int w, int h) {
  if (w == src.w && h == src.h) return src;
  Grid out(w, h);
  const double sx = static_cast<double>(src.w) / w, sy = static_cast<double>(src.h) / h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out(x, y) = src.bilinear((x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
  return out;
}

Grid gaussian_blur(const Grid& src, double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(sigma * 2.5)));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-i * i / (2 * sigma * sigma));
  for (double& x : k) x /= sum;
  Grid tmp(src.w, src.h), out(src.w, src.h);
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * src.clamped(x + i, y);
      tmp(x, y) = acc;
    }
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.clamped(x, y + i);
      out(x, y) = acc;
    }
  return out;
}

Grid box_blur(const Grid& src, int window) {
  const int r = window / 2;
  Grid tmp(src.w, src.h), out(src.w, src.h);
  const double norm = 1.0 / window;
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += src.clamped(x + i, y);
      tmp(x, y) = acc * norm;
    }
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += tmp.clamped(x, y + i);
      out(x, y) = acc * norm;
    }
  return out;
}

/// Coefficients of f(p + d) ~ r0 + r1 dx + r2 dy + r3 dx^2 + r4 dy^2 + r5 dx dy,
/// fitted by Gaussian-weighted least squares over a (2n+1)^2 neighborhood.
struct Expansion {
  std::array<Grid, 6> r;
};

class PolyExpander {
 public:
  PolyExpander(int n, double sigma) : n_(n), side_(2 * n + 1) {
    Eigen::Matrix<double, 6, 6> normal = Eigen::Matrix<double, 6, 6>::Zero();
    std::vector<Eigen::Matrix<double, 6, 1>> weighted;
    for (int dy = -n; dy <= n; ++dy)
      for (int dx = -n; dx <= n; ++dx) {
        Eigen::Matrix<double, 6, 1> b;
        b << 1.0, dx, dy, dx * dx, dy * dy, dx * dy;
        const double a = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        normal += a * b * b.transpose();
        weighted.push_back(a * b);
      }
    const Eigen::Matrix<double, 6, 6> inv = normal.inverse();
    for (auto& f : filters_) f.resize(weighted.size());
    for (std::size_t i = 0; i < weighted.size(); ++i) {
      const Eigen::Matrix<double, 6, 1> col = inv * weighted[i];
      for (int c = 0; c < 6; ++c) filters_[c][i] = col(c);
    }
  }

  Expansion expand(const Grid& img) const {
    Expansion e;
    for (auto& g : e.r) g = Grid(img.w, img.h);
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        std::array<double, 6> acc{};
        std::size_t i = 0;
        for (int dy = -n_; dy <= n_; ++dy)
          for (int dx = -n_; dx <= n_; ++dx, ++i) {
            const double v = img.clamped(x + dx, y + dy);
            for (int c = 0; c < 6; ++c) acc[c] += filters_[c][i] * v;
          }
        for (int c = 0; c < 6; ++c) e.r[c](x, y) = acc[c];
      }
    return e;
  }

 private:
  int n_;
  int side_;
  std::array<std::vector<double>, 6> filters_;
};

void refine(const Expansion& e1, const Expansion& e2, Grid& fx, Grid& fy, const FlowParams& params) {
  const int w = fx.w, h = fx.h;
  for (int it = 0; it < params.iterations; ++it) {
    Grid g11(w, h), g12(w, h), g22(w, h), h1(w, h), h2(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double dx = fx(x, y), dy = fy(x, y);
        const double px = x + dx, py = y + dy;
        const double a11 = 0.5 * (e1.r[3](x, y) + e2.r[3].bilinear(px, py));
        const double a22 = 0.5 * (e1.r[4](x, y) + e2.r[4].bilinear(px, py));
        const double a12 = 0.25 * (e1.r[5](x, y) + e2.r[5].bilinear(px, py));
        const double b1 = -0.5 * (e2.r[1].bilinear(px, py) - e1.r[1](x, y)) + a11 * dx + a12 * dy;
        const double b2 = -0.5 * (e2.r[2].bilinear(px, py) - e1.r[2](x, y)) + a12 * dx + a22 * dy;
        g11(x, y) = a11 * a11 + a12 * a12;
        g12(x, y) = a12 * (a11 + a22);
        g22(x, y) = a12 * a12 + a22 * a22;
        h1(x, y) = a11 * b1 + a12 * b2;
        h2(x, y) = a12 * b1 + a22 * b2;
      }
    g11 = box_blur(g11, params.window);
    g12 = box_blur(g12, params.window);
    g22 = box_blur(g22, params.window);
    h1 = box_blur(h1, params.window);
    h2 = box_blur(h2, params.window);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double det = g11(x, y) * g22(x, y) - g12(x, y) * g12(x, y) + 1e-3;
        fx(x, y) = (g22(x, y) * h1(x, y) - g12(x, y) * h2(x, y)) / det;
        fy(x, y) = (g11(x, y) * h2(x, y) - g12(x, y) * h1(x, y)) / det;
      }
  }
}

}  // namespace

FlowField dense_flow(const Plane& frame_a, const Plane& frame_b, const FlowParams& params) {
  params.validate();
  if (frame_a.width() != frame_b.width() || frame_a.height() != frame_b.height())
    throw InputError("dense_flow: frames differ in size");
  if (frame_a.width() < 1 || frame_a.height() < 1) throw InputError("dense_flow: empty frame");

  // Intensities on the 0-255 scale keep the solver's regularizer negligible.
  std::vector<Grid> pyr_a{from_plane(frame_a, 255.0)}, pyr_b{from_plane(frame_b, 255.0)};
  const double blur_sigma = (1.0 / params.pyramid_scale - 1.0) * 0.5;
  const int min_side = 2 * params.poly_n + 1;
  for (int l = 1; l < params.levels; ++l) {
    const int w = static_cast<int>(std::lround(pyr_a.back().w * params.pyramid_scale));
    const int h = static_cast<int>(std::lround(pyr_a.back().h * params.pyramid_scale));
    if (w < min_side || h < min_side) break;
    pyr_a.push_back(resize(gaussian_blur(pyr_a.back(), blur_sigma), w, h));
    pyr_b.push_back(resize(gaussian_blur(pyr_b.back(), blur_sigma), w, h));
  }

  const PolyExpander expander(params.poly_n, params.poly_sigma);
  Grid fx, fy;
  for (int l = static_cast<int>(pyr_a.size()) - 1; l >= 0; --l) {
    const Grid& a = pyr_a[l];
    if (fx.v.empty()) {
      fx = Grid(a.w, a.h);
      fy = Grid(a.w, a.h);
    } else {
      const double sx = static_cast<double>(a.w) / fx.w, sy = static_cast<double>(a.h) / fx.h;
      fx = resize(fx, a.w, a.h);
      fy = resize(fy, a.w, a.h);
      for (double& v : fx.v) v *= sx;
      for (double& v : fy.v) v *= sy;
    }
    const auto e1 = expander.expand(a);
    const auto e2 = expander.expand(pyr_b[l]);
    refine(e1, e2, fx, fy, params);
  }

  FlowField out{Plane(frame_a.width(), frame_a.height()), Plane(frame_a.width(), frame_a.height())};
  for (int y = 0; y < fx.h; ++y)
    for (int x = 0; x < fx.w; ++x) {
      out.dx(x, y) = static_cast<float>(fx(x, y));
      out.dy(x, y) = static_cast<float>(fy(x, y));
    }
  return out;
}

}  // namespace stsnn
