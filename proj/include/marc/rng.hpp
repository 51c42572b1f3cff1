#pragma once

#include <random>
#include <sstream>
#include <string>

#include "marc/matrix.hpp"

namespace marc {

using Rng = std::mt19937_64;

// Decorrelated child seed for a named subsystem of a run.
inline uint64_t sub_seed(uint64_t seed, uint64_t stream) {
  Rng r(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  return r();
}

// Uniform in +-sqrt(1/fan_in); layer init.
inline Matrix init_uniform(int rows, int cols, int fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (double& v : m.data) v = dist(rng);
  return m;
}

inline std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline Rng rng_from_string(const std::string& s) {
  Rng rng;
  std::istringstream is(s);
  is >> rng;
  if (is.fail()) throw std::runtime_error("rng_from_string: malformed RNG state");
  return rng;
}

}  // namespace marc
