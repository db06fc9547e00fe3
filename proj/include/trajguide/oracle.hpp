#pragma once

#include <optional>
#include <vector>

#include "trajguide/schedule.hpp"
#include "trajguide/tensor.hpp"

namespace trajguide {

enum class OracleKind { kConstantEps, kIsotropicGaussian, kGaussianMixture, kTabulatedTarget };

/// What the oracle's raw output means: the noise eps, or the flow velocity
/// v = eps - x0.
enum class OutputConvention { kEpsilon, kVelocity };

/// Closed-form posterior means E[eps | x_t] and E[x0 | x_t].
struct Posterior {
  Tensor eps;
  Tensor x0;
};

/// Analytic stand-in for a trained denoiser. Each oracle knows the exact data
/// distribution, so its predictions are the true posterior means at the
/// requested noise level.
///
/// Means may be scalars (shape [1,1,1,1], broadcast) or full latents; the
/// covariance of every Gaussian is isotropic.
class DenoiserOracle {
 public:
  static DenoiserOracle constant_eps(double eps, OutputConvention convention = OutputConvention::kEpsilon);
  static DenoiserOracle isotropic_gaussian(Tensor mean, double variance,
                                           OutputConvention convention = OutputConvention::kEpsilon);
  static DenoiserOracle gaussian_mixture(std::vector<double> weights, std::vector<Tensor> means,
                                         std::vector<double> variances,
                                         OutputConvention convention = OutputConvention::kEpsilon);
  /// Perfect denoiser: x0 prediction is always `target`.
  static DenoiserOracle tabulated(Tensor target, OutputConvention convention = OutputConvention::kEpsilon);

  OracleKind kind() const { return kind_; }
  OutputConvention convention() const { return convention_; }
  DenoiserOracle with_convention(OutputConvention convention) const;

  Posterior posterior(const Tensor& x, NoiseLevel level) const;
  /// Raw network-style output: eps or v depending on convention().
  Tensor output(const Tensor& x, NoiseLevel level) const;

  /// The exact clean sample a perfect denoiser returns, when it has one.
  const Tensor* known_data() const { return kind_ == OracleKind::kTabulatedTarget ? &means_.front() : nullptr; }

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Tensor>& means() const { return means_; }
  const std::vector<double>& variances() const { return variances_; }
  double constant() const { return constant_; }

 private:
  DenoiserOracle() = default;

  OracleKind kind_ = OracleKind::kConstantEps;
  OutputConvention convention_ = OutputConvention::kEpsilon;
  double constant_ = 0.0;
  std::vector<double> weights_;
  std::vector<Tensor> means_;
  std::vector<double> variances_;
};

}  // namespace trajguide
