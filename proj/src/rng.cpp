#include "trajguide/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace trajguide {
namespace {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::string to_string(NoisePurpose purpose) {
  switch (purpose) {
    case NoisePurpose::kInitial: return "initial";
    case NoisePurpose::kRenoise: return "renoise";
    case NoisePurpose::kChannelMix: return "channel_mix";
    case NoisePurpose::kScene: return "scene";
    case NoisePurpose::kTest: return "test";
  }
  return "unknown";
}

CounterStream::CounterStream(std::uint64_t seed, const NoiseKey& key) {
  std::uint64_t k = mix64(seed);
  k = mix64(k ^ static_cast<std::uint64_t>(key.purpose));
  k = mix64(k ^ key.step);
  k = mix64(k ^ key.sub);
  key_ = k;
}

std::uint64_t CounterStream::bits(std::uint64_t counter) const {
  return mix64(key_ ^ mix64(counter));
}

double CounterStream::uniform(std::uint64_t counter) const {
  // 53 random mantissa bits, shifted off zero.
  return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterStream::normal(std::uint64_t index) const {
  const std::uint64_t pair = index / 2;
  const double u1 = uniform(2 * pair);
  const double u2 = uniform(2 * pair + 1);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return (index % 2 == 0) ? r * std::cos(angle) : r * std::sin(angle);
}

Tensor KeyedRng::gaussian(const Shape& shape, const NoiseKey& key) {
  Tensor out(shape);
  CounterStream stream(seed_, key);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = stream.normal(i);
  }
  record(key, out.values());
  return out;
}

std::vector<double> KeyedRng::gaussian(std::size_t count, const NoiseKey& key) {
  std::vector<double> out(count);
  CounterStream stream(seed_, key);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = stream.normal(i);
  }
  record(key, out);
  return out;
}

std::vector<double> KeyedRng::uniform(std::size_t count, const NoiseKey& key) {
  std::vector<double> out(count);
  CounterStream stream(seed_, key);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = stream.uniform(i);
  }
  record(key, out);
  return out;
}

void KeyedRng::record(const NoiseKey& key, std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values) {
    h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  }
  log_.push_back(DrawRecord{key, values.size(), h});
}

}  // namespace trajguide
