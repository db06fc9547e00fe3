#pragma once

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "trajguide/tensor.hpp"

namespace testutil {

inline trajguide::Tensor random_tensor(const trajguide::Shape& shape, std::mt19937_64& gen, double lo = -1.0,
                                       double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  trajguide::Tensor t(shape);
  for (double& v : t.values()) v = d(gen);
  return t;
}

inline trajguide::ValidityMask random_mask(const trajguide::Shape& shape, std::mt19937_64& gen, double p = 0.5) {
  std::bernoulli_distribution d(p);
  trajguide::ValidityMask m(shape);
  for (auto& v : m.values()) v = d(gen) ? 1 : 0;
  return m;
}

inline bool bit_equal(const trajguide::Tensor& a, const trajguide::Tensor& b) {
  if (!(a.shape() == b.shape())) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::memcmp(&a.values()[i], &b.values()[i], sizeof(double)) != 0) return false;
  return true;
}

/// Scratch directory under the build tree (or the system temp dir).
inline std::filesystem::path scratch(const std::string& name) {
  const char* root = std::getenv("TRAJGUIDE_TEST_TMP");
  std::filesystem::path dir = root ? std::filesystem::path(root) : std::filesystem::temp_directory_path() / "trajguide";
  dir /= name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
