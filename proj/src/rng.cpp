#include "depthgen/rng.hpp"

#include <cmath>

namespace depthgen {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() {
  // Mix the seed once so nearby seeds give unrelated streams.
  std::uint64_t k = splitmix64(seed_ ^ 0xA5A5A5A55A5A5A5AULL);
  return splitmix64(k + counter_++ * 0x9E3779B97F4A7C15ULL);
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) { return a + uniform01() * (b - a); }

double Rng::normal(double mu, double sigma) {
  // u1 in (0,1] so the log is finite.
  double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = uniform01();
  double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  return mu + sigma * z;
}

double Rng::truncated_normal(double sigma) {
  for (;;) {
    double x = normal(0.0, sigma);
    if (std::fabs(x) <= 2.0 * sigma) return x;
  }
}

}  // namespace depthgen
