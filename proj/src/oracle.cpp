#include "trajguide/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "trajguide/error.hpp"

namespace trajguide {
namespace {

bool is_scalar(const Tensor& t) { return t.shape() == Shape{}; }

double mean_at(const Tensor& mean, std::size_t i) { return is_scalar(mean) ? mean[0] : mean[i]; }

void require_mean_fits(const Tensor& mean, const Tensor& x) {
  if (!is_scalar(mean) && mean.shape() != x.shape()) {
    throw Error("oracle mean shape " + to_string(mean.shape()) + " does not match latent " +
                to_string(x.shape()));
  }
}

void require_level(NoiseLevel level) {
  if (!(level.alpha >= 0.0) || !(level.sigma >= 0.0) || (level.alpha == 0.0 && level.sigma == 0.0)) {
    throw Error("invalid noise level");
  }
}

}  // namespace

DenoiserOracle DenoiserOracle::constant_eps(double eps, OutputConvention convention) {
  if (!std::isfinite(eps)) {
    throw Error("constant eps must be finite");
  }
  DenoiserOracle o;
  o.kind_ = OracleKind::kConstantEps;
  o.convention_ = convention;
  o.constant_ = eps;
  return o;
}

DenoiserOracle DenoiserOracle::isotropic_gaussian(Tensor mean, double variance, OutputConvention convention) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw Error("isotropic gaussian variance must be positive");
  }
  require_finite(mean, "gaussian mean");
  DenoiserOracle o;
  o.kind_ = OracleKind::kIsotropicGaussian;
  o.convention_ = convention;
  o.weights_ = {1.0};
  o.means_ = {std::move(mean)};
  o.variances_ = {variance};
  return o;
}

DenoiserOracle DenoiserOracle::gaussian_mixture(std::vector<double> weights, std::vector<Tensor> means,
                                                std::vector<double> variances, OutputConvention convention) {
  if (weights.empty() || weights.size() != means.size() || weights.size() != variances.size()) {
    throw Error("gaussian mixture needs matching, non-empty weights/means/variances");
  }
  if (std::any_of(weights.begin(), weights.end(), [](double w) { return !(w > 0.0); })) {
    throw Error("gaussian mixture weights must be positive");
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error("gaussian mixture weights must sum to 1");
  }
  if (std::any_of(variances.begin(), variances.end(), [](double v) { return !(v > 0.0) || !std::isfinite(v); })) {
    throw Error("gaussian mixture variances must be positive");
  }
  const bool scalar = is_scalar(means.front());
  for (const Tensor& m : means) {
    require_finite(m, "gaussian mixture mean");
    if (is_scalar(m) != scalar || (!scalar && m.shape() != means.front().shape())) {
      throw Error("gaussian mixture means must all be scalars or all share one latent shape");
    }
  }
  DenoiserOracle o;
  o.kind_ = OracleKind::kGaussianMixture;
  o.convention_ = convention;
  o.weights_ = std::move(weights);
  o.means_ = std::move(means);
  o.variances_ = std::move(variances);
  return o;
}

DenoiserOracle DenoiserOracle::tabulated(Tensor target, OutputConvention convention) {
  require_finite(target, "tabulated target");
  DenoiserOracle o;
  o.kind_ = OracleKind::kTabulatedTarget;
  o.convention_ = convention;
  o.means_ = {std::move(target)};
  return o;
}

DenoiserOracle DenoiserOracle::with_convention(OutputConvention convention) const {
  DenoiserOracle o = *this;
  o.convention_ = convention;
  return o;
}

Posterior DenoiserOracle::posterior(const Tensor& x, NoiseLevel level) const {
  require_level(level);
  const double a = level.alpha;
  const double s = level.sigma;
  Posterior p{Tensor(x.shape()), Tensor(x.shape())};
  const std::size_t n = x.size();

  switch (kind_) {
    case OracleKind::kConstantEps: {
      if (a == 0.0) {
        throw Error("schedule singularity: constant-eps oracle has no x0 at alpha = 0");
      }
      for (std::size_t i = 0; i < n; ++i) {
        p.eps[i] = constant_;
        p.x0[i] = (x[i] - s * constant_) / a;
      }
      break;
    }
    case OracleKind::kIsotropicGaussian: {
      const Tensor& mean = means_.front();
      require_mean_fits(mean, x);
      const double v = variances_.front();
      const double denom = a * a * v + s * s;
      for (std::size_t i = 0; i < n; ++i) {
        const double m = mean_at(mean, i);
        const double r = x[i] - a * m;
        p.eps[i] = s * r / denom;
        p.x0[i] = (s * s * m + a * v * x[i]) / denom;
      }
      break;
    }
    case OracleKind::kGaussianMixture: {
      const std::size_t k_count = weights_.size();
      std::vector<double> denom(k_count);
      for (std::size_t k = 0; k < k_count; ++k) {
        require_mean_fits(means_[k], x);
        denom[k] = a * a * variances_[k] + s * s;
      }
      std::vector<double> logr(k_count);
      auto normalize = [&](std::vector<double>& lr) {
        const double top = *std::max_element(lr.begin(), lr.end());
        double z = 0.0;
        for (double& l : lr) {
          l = std::exp(l - top);
          z += l;
        }
        for (double& l : lr) {
          l /= z;
        }
      };
      auto accumulate = [&](std::size_t i, const std::vector<double>& r) {
        double eps = 0.0;
        double x0 = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) {
          const double m = mean_at(means_[k], i);
          eps += r[k] * s * (x[i] - a * m) / denom[k];
          x0 += r[k] * (s * s * m + a * variances_[k] * x[i]) / denom[k];
        }
        p.eps[i] = eps;
        p.x0[i] = x0;
      };
      if (is_scalar(means_.front())) {
        // Independent scalar mixture per element.
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t k = 0; k < k_count; ++k) {
            const double r = x[i] - a * means_[k][0];
            logr[k] = std::log(weights_[k]) - 0.5 * std::log(denom[k]) - 0.5 * r * r / denom[k];
          }
          normalize(logr);
          accumulate(i, logr);
        }
      } else {
        // Mixture over whole latents: one responsibility vector for all elements.
        for (std::size_t k = 0; k < k_count; ++k) {
          double sq = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const double r = x[i] - a * means_[k][i];
            sq += r * r;
          }
          logr[k] = std::log(weights_[k]) - 0.5 * static_cast<double>(n) * std::log(denom[k]) -
                    0.5 * sq / denom[k];
        }
        normalize(logr);
        for (std::size_t i = 0; i < n; ++i) {
          accumulate(i, logr);
        }
      }
      break;
    }
    case OracleKind::kTabulatedTarget: {
      const Tensor& target = means_.front();
      require_same_shape(target, x, "tabulated oracle");
      for (std::size_t i = 0; i < n; ++i) {
        p.eps[i] = s > 0.0 ? (x[i] - a * target[i]) / s : 0.0;
        p.x0[i] = target[i];
      }
      break;
    }
  }
  return p;
}

Tensor DenoiserOracle::output(const Tensor& x, NoiseLevel level) const {
  if (kind_ == OracleKind::kConstantEps && convention_ == OutputConvention::kEpsilon) {
    return Tensor(x.shape(), constant_);
  }
  Posterior p = posterior(x, level);
  if (convention_ == OutputConvention::kEpsilon) {
    return std::move(p.eps);
  }
  Tensor v(x.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = p.eps[i] - p.x0[i];
  }
  return v;
}

}  // namespace trajguide
