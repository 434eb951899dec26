#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>

namespace nrsw {

// SplitMix64 finalizer: a full-avalanche bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Well-known stream tags so derived substreams never collide by accident.
namespace stream {
inline constexpr std::uint64_t field = 1;
inline constexpr std::uint64_t pair_a = 2;
inline constexpr std::uint64_t pair_b = 3;
inline constexpr std::uint64_t interp = 4;
inline constexpr std::uint64_t vectors = 5;
inline constexpr std::uint64_t quadrature = 6;
}

/**
 * Counter-based splittable generator.
 *
 * The word at counter k is a pure function of (seed, replica, stream, k):
 * a Weyl sequence keyed by the mixed triple, finalized by mix64. Replicas
 * and streams can therefore be generated in any order, on any thread, and
 * still produce identical draws.
 */
class CounterRng {
public:
  CounterRng(std::uint64_t seed, std::uint64_t replica,
             std::uint64_t stream_tag) noexcept
      : base_(derive(seed, replica, stream_tag)) {}

  std::uint64_t at(std::uint64_t counter) const noexcept {
    return mix64(base_ + (counter + 1) * kGolden);
  }

  std::uint64_t next() noexcept { return at(counter_++); }

  std::uint64_t counter() const noexcept { return counter_; }

  // Uniform on (0,1]; never returns 0, so it is safe under log().
  double next_unit() noexcept {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  // Box-Muller pair; consumes exactly two counters, which keeps the
  // counter <-> draw mapping stable across refactorings.
  void next_normal_pair(double& z0, double& z1) noexcept {
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    z0 = r * std::cos(t);
    z1 = r * std::sin(t);
  }

  double next_normal() noexcept {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double a, b;
    next_normal_pair(a, b);
    spare_ = b;
    have_spare_ = true;
    return a;
  }

private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t derive(std::uint64_t seed, std::uint64_t replica,
                              std::uint64_t stream_tag) noexcept {
    std::uint64_t z = mix64(seed ^ 0x8C8F8EEF3D824D07ULL);
    z = mix64(z ^ mix64(replica ^ 0xA511E9B3D1C8AB4FULL));
    z = mix64(z ^ mix64(stream_tag ^ 0x2545F4914F6CDD1DULL));
    return z;
  }

  std::uint64_t base_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace nrsw
