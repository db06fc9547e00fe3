#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace trajguide {

/// Extent of a [C, T, H, W] tensor.
struct Shape {
  std::size_t channels = 1;
  std::size_t frames = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t numel() const { return channels * frames * height * width; }
  std::size_t plane() const { return height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& shape);

/// Dense 64-bit [C, T, H, W] array in C order. The shape is fixed at
/// construction; element access never reallocates.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value) { return Tensor(Shape{}, value); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(std::size_t c, std::size_t t, std::size_t y, std::size_t x) const {
    return ((c * shape_.frames + t) * shape_.height + y) * shape_.width + x;
  }
  double& at(std::size_t c, std::size_t t, std::size_t y, std::size_t x) {
    return data_[index(c, t, y, x)];
  }
  double at(std::size_t c, std::size_t t, std::size_t y, std::size_t x) const {
    return data_[index(c, t, y, x)];
  }

  /// Copy of channel `c` as a [1, T, H, W] tensor.
  Tensor channel(std::size_t c) const;
  /// Copy of frame `t` as a [C, 1, H, W] tensor.
  Tensor frame(std::size_t t) const;
  void set_frame(std::size_t t, const Tensor& frame);

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{};
  std::vector<double> data_ = std::vector<double>(1, 0.0);
};

/// Throws trajguide::Error naming `what` when any entry is NaN or infinite.
void require_finite(const Tensor& tensor, const std::string& what);
void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what);

double max_abs_diff(const Tensor& a, const Tensor& b);
double l2_norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

/// Binary observation mask, [C or 1, T, H, W]. A single-channel mask is
/// broadcast over the channels of whatever latent it is applied to.
class ValidityMask {
 public:
  ValidityMask() = default;
  explicit ValidityMask(Shape shape, std::uint8_t fill = 0);
  ValidityMask(Shape shape, std::vector<std::uint8_t> values);

  static ValidityMask ones(Shape shape) { return ValidityMask(shape, 1); }

  const Shape& shape() const { return shape_; }
  std::span<std::uint8_t> values() { return data_; }
  std::span<const std::uint8_t> values() const { return data_; }

  std::uint8_t& at(std::size_t c, std::size_t t, std::size_t y, std::size_t x) {
    return data_[((c * shape_.frames + t) * shape_.height + y) * shape_.width + x];
  }
  std::uint8_t at(std::size_t c, std::size_t t, std::size_t y, std::size_t x) const {
    return data_[((c * shape_.frames + t) * shape_.height + y) * shape_.width + x];
  }

  /// Mask value for channel `c` of a latent, honouring single-channel broadcast.
  bool observed(std::size_t c, std::size_t t, std::size_t y, std::size_t x) const {
    return at(shape_.channels == 1 ? 0 : c, t, y, x) != 0;
  }

  /// True when this mask can be applied to a latent of shape `latent`.
  bool broadcasts_to(const Shape& latent) const;
  std::size_t count() const;
  void set_frame(std::size_t t, const ValidityMask& frame);

  friend bool operator==(const ValidityMask&, const ValidityMask&) = default;

 private:
  Shape shape_{};
  std::vector<std::uint8_t> data_ = std::vector<std::uint8_t>(1, 0);
};

}  // namespace trajguide
