#include "trajguide/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "trajguide/error.hpp"

namespace trajguide {
namespace {

// Planar image with clamped access.
struct Plane {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> px;

  Plane() = default;
  Plane(std::size_t h_, std::size_t w_, double fill = 0.0) : h(h_), w(w_), px(h_ * w_, fill) {}

  double& operator()(std::size_t y, std::size_t x) { return px[y * w + x]; }
  double operator()(std::size_t y, std::size_t x) const { return px[y * w + x]; }
  double clamped(long y, long x) const {
    y = std::clamp(y, 0L, static_cast<long>(h) - 1);
    x = std::clamp(x, 0L, static_cast<long>(w) - 1);
    return px[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  }
  double bilinear(double y, double x) const {
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    const auto y0 = static_cast<long>(std::floor(y));
    const auto x0 = static_cast<long>(std::floor(x));
    const double fy = y - static_cast<double>(y0);
    const double fx = x - static_cast<double>(x0);
    return (1 - fy) * ((1 - fx) * clamped(y0, x0) + fx * clamped(y0, x0 + 1)) +
           fy * ((1 - fx) * clamped(y0 + 1, x0) + fx * clamped(y0 + 1, x0 + 1));
  }
};

std::vector<double> gaussian_kernel(double sigma) {
  const long radius = std::max(1L, static_cast<long>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

Plane blur(const Plane& src, double sigma) {
  if (sigma <= 0.0) return src;
  const auto k = gaussian_kernel(sigma);
  const long r = static_cast<long>(k.size() / 2);
  Plane tmp(src.h, src.w);
  Plane out(src.h, src.w);
  for (std::size_t y = 0; y < src.h; ++y)
    for (std::size_t x = 0; x < src.w; ++x) {
      double acc = 0.0;
      for (long i = -r; i <= r; ++i)
        acc += k[static_cast<std::size_t>(i + r)] * src.clamped(static_cast<long>(y), static_cast<long>(x) + i);
      tmp(y, x) = acc;
    }
  for (std::size_t y = 0; y < src.h; ++y)
    for (std::size_t x = 0; x < src.w; ++x) {
      double acc = 0.0;
      for (long i = -r; i <= r; ++i)
        acc += k[static_cast<std::size_t>(i + r)] * tmp.clamped(static_cast<long>(y) + i, static_cast<long>(x));
      out(y, x) = acc;
    }
  return out;
}

Plane resize(const Plane& src, std::size_t h, std::size_t w) {
  if (src.h == h && src.w == w) return src;
  Plane out(h, w);
  const double sy = static_cast<double>(src.h) / static_cast<double>(h);
  const double sx = static_cast<double>(src.w) / static_cast<double>(w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      out(y, x) = src.bilinear((static_cast<double>(y) + 0.5) * sy - 0.5, (static_cast<double>(x) + 0.5) * sx - 0.5);
  return out;
}

// Quadratic fit f(p) ~ p'Ap + b'p + c around every pixel, weighted by a
// separable Gaussian. Coefficients per pixel: b_x, b_y, a_xx, a_yy, a_xy
// (a_xy already halved, i.e. the off-diagonal of A).
struct PolyExpansion {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<std::array<double, 5>> r;
};

class PolyFitter {
 public:
  PolyFitter(std::size_t n, double sigma) : n_(static_cast<long>(n)) {
    const long side = 2 * n_ + 1;
    const long count = side * side;
    Eigen::MatrixXd B(count, 6);
    Eigen::VectorXd wts(count);
    long row = 0;
    for (long dy = -n_; dy <= n_; ++dy)
      for (long dx = -n_; dx <= n_; ++dx, ++row) {
        const double x = static_cast<double>(dx);
        const double y = static_cast<double>(dy);
        B.row(row) << 1.0, x, y, x * x, y * y, x * y;
        wts(row) = std::exp(-0.5 * (x * x + y * y) / (sigma * sigma));
      }
    const Eigen::MatrixXd G = B.transpose() * wts.asDiagonal() * B;
    proj_ = G.ldlt().solve(B.transpose() * wts.asDiagonal());
  }

  PolyExpansion expand(const Plane& img) const {
    PolyExpansion out{img.h, img.w, std::vector<std::array<double, 5>>(img.h * img.w)};
    const long side = 2 * n_ + 1;
    std::vector<double> window(static_cast<std::size_t>(side * side));
    for (std::size_t y = 0; y < img.h; ++y)
      for (std::size_t x = 0; x < img.w; ++x) {
        std::size_t k = 0;
        for (long dy = -n_; dy <= n_; ++dy)
          for (long dx = -n_; dx <= n_; ++dx)
            window[k++] = img.clamped(static_cast<long>(y) + dy, static_cast<long>(x) + dx);
        std::array<double, 5> c{};
        for (Eigen::Index j = 0; j < proj_.cols(); ++j) {
          const double f = window[static_cast<std::size_t>(j)];
          c[0] += proj_(1, j) * f;
          c[1] += proj_(2, j) * f;
          c[2] += proj_(3, j) * f;
          c[3] += proj_(4, j) * f;
          c[4] += proj_(5, j) * f;
        }
        c[4] *= 0.5;
        out.r[y * img.w + x] = c;
      }
    return out;
  }

 private:
  long n_;
  Eigen::MatrixXd proj_;
};

std::array<double, 5> sample(const PolyExpansion& p, double y, double x) {
  y = std::clamp(y, 0.0, static_cast<double>(p.h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(p.w - 1));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, p.h - 1);
  const std::size_t x1 = std::min(x0 + 1, p.w - 1);
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  std::array<double, 5> out{};
  for (std::size_t i = 0; i < 5; ++i)
    out[i] = (1 - fy) * ((1 - fx) * p.r[y0 * p.w + x0][i] + fx * p.r[y0 * p.w + x1][i]) +
             fy * ((1 - fx) * p.r[y1 * p.w + x0][i] + fx * p.r[y1 * p.w + x1][i]);
  return out;
}

// Mean over a (window x window) box truncated at the image border.
void box_mean(std::vector<std::array<double, 5>>& m, std::size_t h, std::size_t w, std::size_t window) {
  const long r = static_cast<long>(window / 2);
  std::vector<std::array<double, 5>> tmp(m.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      std::array<double, 5> acc{};
      const long lo = std::max(0L, static_cast<long>(x) - r);
      const long hi = std::min(static_cast<long>(w) - 1, static_cast<long>(x) + r);
      for (long i = lo; i <= hi; ++i)
        for (std::size_t k = 0; k < 5; ++k) acc[k] += m[y * w + static_cast<std::size_t>(i)][k];
      for (double& a : acc) a /= static_cast<double>(hi - lo + 1);
      tmp[y * w + x] = acc;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      std::array<double, 5> acc{};
      const long lo = std::max(0L, static_cast<long>(y) - r);
      const long hi = std::min(static_cast<long>(h) - 1, static_cast<long>(y) + r);
      for (long i = lo; i <= hi; ++i)
        for (std::size_t k = 0; k < 5; ++k) acc[k] += tmp[static_cast<std::size_t>(i) * w + x][k];
      for (double& a : acc) a /= static_cast<double>(hi - lo + 1);
      m[y * w + x] = acc;
    }
}

void refine(const PolyExpansion& p1, const PolyExpansion& p2, Plane& u, Plane& v, const FlowParams& params) {
  const std::size_t h = p1.h;
  const std::size_t w = p1.w;
  std::vector<std::array<double, 5>> m(h * w);
  for (std::size_t it = 0; it < params.iterations; ++it) {
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double du = u(y, x);
        const double dv = v(y, x);
        const auto& a = p1.r[y * w + x];
        const auto b = sample(p2, static_cast<double>(y) + dv, static_cast<double>(x) + du);
        const double axx = 0.5 * (a[2] + b[2]);
        const double ayy = 0.5 * (a[3] + b[3]);
        const double axy = 0.5 * (a[4] + b[4]);
        const double hx = -0.5 * (b[0] - a[0]) + axx * du + axy * dv;
        const double hy = -0.5 * (b[1] - a[1]) + axy * du + ayy * dv;
        m[y * w + x] = {axx * axx + axy * axy, axy * (axx + ayy), axy * axy + ayy * ayy, axx * hx + axy * hy,
                        axy * hx + ayy * hy};
      }
    box_mean(m, h, w, params.window);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const auto& g = m[y * w + x];
        const double idet = 1.0 / (g[0] * g[2] - g[1] * g[1] + 1e-3);
        u(y, x) = (g[2] * g[3] - g[1] * g[4]) * idet;
        v(y, x) = (g[0] * g[4] - g[1] * g[3]) * idet;
      }
  }
}

}  // namespace

void FlowParams::validate() const {
  if (levels == 0) throw Error("flow pyramid needs at least one level");
  if (!(pyr_scale > 0.0 && pyr_scale < 1.0)) throw Error("flow pyramid scale must lie in (0, 1)");
  if (window == 0 || window % 2 == 0) throw Error("flow window must be a positive odd size");
  if (iterations == 0) throw Error("flow needs at least one iteration");
  if (poly_n == 0) throw Error("polynomial neighbourhood must be positive");
  if (!(poly_sigma > 0.0)) throw Error("polynomial sigma must be positive");
}

ChannelRange normalize_channel(Tensor& channel) {
  auto vals = channel.values();
  const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
  ChannelRange range{*lo, *hi};
  const double span = range.max - range.min;
  if (span <= 0.0) {
    std::fill(vals.begin(), vals.end(), 0.0);
    return range;
  }
  for (double& x : vals) x = 255.0 * (x - range.min) / span;
  return range;
}

void estimate_pair_flow(std::span<const double> a, std::span<const double> b, std::size_t height,
                        std::size_t width, const FlowParams& params, std::span<double> u, std::span<double> v) {
  params.validate();
  if (a.size() != height * width || b.size() != height * width || u.size() != a.size() || v.size() != a.size())
    throw Error("flow input and output planes must all be H x W");
  if (std::min(height, width) < params.window)
    throw Error("frame " + std::to_string(height) + "x" + std::to_string(width) + " is smaller than the flow window " +
                std::to_string(params.window));

  std::size_t levels = params.levels;
  while (levels > 1) {
    const double s = std::pow(params.pyr_scale, static_cast<double>(levels - 1));
    if (std::round(static_cast<double>(std::min(height, width)) * s) >= static_cast<double>(params.window)) break;
    --levels;
  }
  if (levels < params.levels)
    warn("flow pyramid reduced from " + std::to_string(params.levels) + " to " + std::to_string(levels) +
         " levels for " + std::to_string(height) + "x" + std::to_string(width) + " frames");

  Plane img1(height, width);
  Plane img2(height, width);
  std::copy(a.begin(), a.end(), img1.px.begin());
  std::copy(b.begin(), b.end(), img2.px.begin());

  const PolyFitter fitter(params.poly_n, params.poly_sigma);
  Plane fu;
  Plane fv;
  for (std::size_t lvl = levels; lvl-- > 0;) {
    const double s = std::pow(params.pyr_scale, static_cast<double>(lvl));
    const auto h = static_cast<std::size_t>(std::round(static_cast<double>(height) * s));
    const auto w = static_cast<std::size_t>(std::round(static_cast<double>(width) * s));
    const double sigma = (1.0 / s - 1.0) * 0.5;
    const Plane l1 = resize(blur(img1, sigma), h, w);
    const Plane l2 = resize(blur(img2, sigma), h, w);
    if (fu.px.empty()) {
      fu = Plane(h, w);
      fv = Plane(h, w);
    } else {
      const double gx = static_cast<double>(w) / static_cast<double>(fu.w);
      const double gy = static_cast<double>(h) / static_cast<double>(fu.h);
      fu = resize(fu, h, w);
      fv = resize(fv, h, w);
      for (double& x : fu.px) x *= gx;
      for (double& y : fv.px) y *= gy;
    }
    refine(fitter.expand(l1), fitter.expand(l2), fu, fv, params);
  }
  std::copy(fu.px.begin(), fu.px.end(), u.begin());
  std::copy(fv.px.begin(), fv.px.end(), v.begin());
}

FlowField estimate_flow(const Tensor& channel, const FlowParams& params) {
  const Shape& s = channel.shape();
  if (s.channels != 1) throw Error("estimate_flow expects a single channel [1, T, H, W], got " + to_string(s));
  if (s.frames < 2) throw Error("estimate_flow needs at least two frames");
  require_finite(channel, "flow input");
  Tensor norm = channel;
  normalize_channel(norm);
  FlowField flow(Shape{2, s.frames - 1, s.height, s.width});
  const std::size_t plane = s.plane();
  auto src = norm.values();
  auto out = flow.values();
  for (std::size_t t = 0; t + 1 < s.frames; ++t)
    estimate_pair_flow(src.subspan(t * plane, plane), src.subspan((t + 1) * plane, plane), s.height, s.width, params,
                       out.subspan(t * plane, plane), out.subspan((s.frames - 1 + t) * plane, plane));
  return flow;
}

}  // namespace trajguide
