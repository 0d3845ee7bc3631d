#ifndef PETNET_BENCHMARK_HPP
#define PETNET_BENCHMARK_HPP

#include "petnet/spectral.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace petnet {

struct BenchmarkConfig {
  std::size_t n = 512;
  int K = 25;
  std::vector<double> densities{0.01, 0.02};
  std::uint64_t seed = 0;
  std::size_t dense_limit = kDefaultDenseLimit;
  /// Minimum wall time of one timing trial.
  double min_seconds = 0.05;

  void validate() const;
};

struct BenchmarkRow {
  std::size_t n = 0;
  std::size_t edges = 0;
  int K = 0;
  std::string method;  // chebyshev | exact | exact_cached
  double seconds = 0.0;
  double max_abs_err = 0.0;  // NaN when the exact path was skipped
};

/// Seconds per call: best of three trials, each at least `min_seconds` long
/// (a single call if one call already exceeds it).
double time_per_call(const std::function<void()>& fn, double min_seconds);

/// Filters one random signal on a random graph per density with the
/// Chebyshev recursion and, below the dense limit, the eigenbasis route using
/// equivalent coefficients.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& cfg);

void write_benchmark_csv(const std::vector<BenchmarkRow>& rows, const std::filesystem::path& path);

}  // namespace petnet

#endif
