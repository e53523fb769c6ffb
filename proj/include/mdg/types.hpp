#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mdg {

// All numerics are 64-bit; tensors and adjacency matrices are dense row-major.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// Pipeline failure (I/O, bad data, numeric blow-up). CLI maps this to exit 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration or spec validation failure. CLI maps this to exit 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Derives an independent seed for a sub-stream (domain index, task index, ...).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

// Deterministic RNG with self-contained distributions, so that identical seeds
// give identical streams regardless of standard-library internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();                         // [0, 1)
  double uniform(double lo, double hi);     // [lo, hi)
  std::int64_t uniform_int(std::int64_t n); // [0, n), unbiased
  double gaussian();                        // standard normal (Box-Muller)

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Shortest decimal representation that round-trips exactly (checkpoints,
// reports and generated files rely on this for byte-stable output).
std::string format_double(double v);
std::string format_fixed(double v, int precision);
double parse_double(const std::string& s);  // throws Error on junk

}  // namespace mdg
