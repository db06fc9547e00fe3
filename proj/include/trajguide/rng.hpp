#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trajguide/tensor.hpp"

namespace trajguide {

/// What a noise draw is used for. Draws are keyed by (seed, purpose, step,
/// sub-index) so adding or removing one consumer never shifts another's values.
enum class NoisePurpose : std::uint32_t {
  kInitial = 1,
  kRenoise = 2,
  kChannelMix = 3,
  kScene = 4,
  kTest = 99,
};

std::string to_string(NoisePurpose purpose);

struct NoiseKey {
  NoisePurpose purpose = NoisePurpose::kInitial;
  std::uint64_t step = 0;
  std::uint64_t sub = 0;
  friend bool operator==(const NoiseKey&, const NoiseKey&) = default;
};

/// One entry of the draw log kept by KeyedRng for reproducibility audits.
struct DrawRecord {
  NoiseKey key;
  std::size_t count = 0;
  std::uint64_t checksum = 0;
  friend bool operator==(const DrawRecord&, const DrawRecord&) = default;
};

/// Stateless counter-based stream: value i of stream k is mix(k, i).
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, const NoiseKey& key);

  std::uint64_t bits(std::uint64_t counter) const;
  /// Uniform in the open interval (0, 1).
  double uniform(std::uint64_t counter) const;
  /// Standard normal via Box-Muller on counters (2i, 2i+1).
  double normal(std::uint64_t index) const;

 private:
  std::uint64_t key_;
};

/// Per-run generator. Every draw is a pure function of (seed, key, index);
/// the object only carries the seed and an append-only audit log.
class KeyedRng {
 public:
  explicit KeyedRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  Tensor gaussian(const Shape& shape, const NoiseKey& key);
  std::vector<double> gaussian(std::size_t count, const NoiseKey& key);
  std::vector<double> uniform(std::size_t count, const NoiseKey& key);

  const std::vector<DrawRecord>& log() const { return log_; }

 private:
  void record(const NoiseKey& key, std::span<const double> values);

  std::uint64_t seed_;
  std::vector<DrawRecord> log_;
};

}  // namespace trajguide
