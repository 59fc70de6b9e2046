#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace frailty {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexVector = Eigen::VectorXi;

// Error hierarchy. The CLI maps each family onto a distinct exit code.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent configuration (unknown keys, bad flag values).
struct ConfigError : Error {
  using Error::Error;
};

/// Problems with the input data itself.
struct DataError : Error {
  using Error::Error;
};

struct SchemaError : DataError {
  using DataError::DataError;
};

/// A row failed validation; `row` is the 1-based data row (header excluded).
struct RowError : DataError {
  RowError(std::size_t row, const std::string& what)
      : DataError("row " + std::to_string(row) + ": " + what), row(row) {}
  std::size_t row;
};

struct ReferentialError : DataError {
  using DataError::DataError;
};

/// The Markov chain produced a non-finite log posterior.
struct SamplerError : Error {
  SamplerError(long iteration, const std::string& what)
      : Error(what), iteration(iteration) {}
  long iteration;  // -1 during initialization
};

/// Seeded 64-bit Mersenne twister with a documented stream-splitting rule.
///
/// Sub-streams are derived as splitmix64(master ^ splitmix64(stream + 1)),
/// so replicate r of a study always sees the same generator regardless of
/// how replicates are scheduled across workers.
class Rng {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit Rng(std::uint64_t seed = 1) : engine_(seed), seed_(seed) {}

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream + 1));
  }

  Rng derive(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

  std::uint64_t seed() const { return seed_; }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    double u;
    do {
      u = std::generate_canonical<double, 53>(engine_);
    } while (u <= 0.0 || u >= 1.0);
    return u;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential() { return -std::log(uniform()); }
  /// Gamma with shape/rate parameterization.
  double gamma(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uint64_t seed_;
};

}  // namespace frailty
