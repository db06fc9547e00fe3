#include "trajguide/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "trajguide/error.hpp"

namespace trajguide {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[' << shape.channels << ", " << shape.frames << ", " << shape.height << ", "
     << shape.width << ']';
  return os.str();
}

namespace {

void require_valid(const Shape& shape) {
  if (shape.channels == 0 || shape.frames == 0 || shape.height == 0 || shape.width == 0) {
    throw Error("tensor shape must be positive on every axis, got " + to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
  require_valid(shape_);
  data_.assign(shape_.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
  require_valid(shape_);
  if (data_.size() != shape_.numel()) {
    throw Error("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                to_string(shape_));
  }
}

Tensor Tensor::channel(std::size_t c) const {
  Shape s = shape_;
  s.channels = 1;
  const std::size_t n = s.numel();
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(c * n);
  return Tensor(s, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(n)));
}

Tensor Tensor::frame(std::size_t t) const {
  Shape s = shape_;
  s.frames = 1;
  Tensor out(s);
  const std::size_t plane = shape_.plane();
  for (std::size_t c = 0; c < shape_.channels; ++c) {
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(index(c, t, 0, 0)), plane,
                out.data_.begin() + static_cast<std::ptrdiff_t>(c * plane));
  }
  return out;
}

void Tensor::set_frame(std::size_t t, const Tensor& frame) {
  const Shape& fs = frame.shape();
  if (fs.channels != shape_.channels || fs.frames != 1 || fs.height != shape_.height ||
      fs.width != shape_.width || t >= shape_.frames) {
    throw Error("set_frame: frame " + to_string(fs) + " does not fit " + to_string(shape_));
  }
  const std::size_t plane = shape_.plane();
  for (std::size_t c = 0; c < shape_.channels; ++c) {
    std::copy_n(frame.data_.begin() + static_cast<std::ptrdiff_t>(c * plane), plane,
                data_.begin() + static_cast<std::ptrdiff_t>(index(c, t, 0, 0)));
  }
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const Tensor& tensor, const std::string& what) {
  if (!tensor.all_finite()) {
    throw Error(what + " contains non-finite values");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
  if (a.shape() != b.shape()) {
    throw Error(what + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

ValidityMask::ValidityMask(Shape shape, std::uint8_t fill) : shape_(shape) {
  require_valid(shape_);
  if (fill > 1) {
    throw Error("validity mask entries must be 0 or 1");
  }
  data_.assign(shape_.numel(), fill);
}

ValidityMask::ValidityMask(Shape shape, std::vector<std::uint8_t> values)
    : shape_(shape), data_(std::move(values)) {
  require_valid(shape_);
  if (data_.size() != shape_.numel()) {
    throw Error("mask data size does not match shape " + to_string(shape_));
  }
  if (std::any_of(data_.begin(), data_.end(), [](std::uint8_t v) { return v > 1; })) {
    throw Error("validity mask entries must be 0 or 1");
  }
}

bool ValidityMask::broadcasts_to(const Shape& latent) const {
  return (shape_.channels == 1 || shape_.channels == latent.channels) &&
         shape_.frames == latent.frames && shape_.height == latent.height &&
         shape_.width == latent.width;
}

std::size_t ValidityMask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

void ValidityMask::set_frame(std::size_t t, const ValidityMask& frame) {
  const Shape& fs = frame.shape();
  if (fs.channels != shape_.channels || fs.frames != 1 || fs.height != shape_.height ||
      fs.width != shape_.width || t >= shape_.frames) {
    throw Error("set_frame: mask frame " + to_string(fs) + " does not fit " + to_string(shape_));
  }
  const std::size_t plane = shape_.plane();
  for (std::size_t c = 0; c < shape_.channels; ++c) {
    std::copy_n(frame.values().begin() + static_cast<std::ptrdiff_t>(c * plane), plane,
                data_.begin() + static_cast<std::ptrdiff_t>((c * shape_.frames + t) * plane));
  }
}

}  // namespace trajguide
