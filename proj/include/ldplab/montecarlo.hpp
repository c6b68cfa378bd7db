#ifndef LDPLAB_MONTECARLO_HPP
#define LDPLAB_MONTECARLO_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

namespace ldplab {

/// Pairwise (cascade) summation. The result depends only on the order of
/// the values, not on how they were produced.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

/// Mean and standard error (sample std / sqrt(n)) of per-sample values.
inline MCEstimate summarize(std::span<const double> values, std::uint64_t seed) {
  if (values.empty()) throw std::invalid_argument("summarize: no samples");
  const auto n = static_cast<double>(values.size());
  const double mean = pairwise_sum(values) / n;
  std::vector<double> dev(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) dev[i] = (values[i] - mean) * (values[i] - mean);
  const double var = values.size() > 1 ? pairwise_sum(dev) / (n - 1.0) : 0.0;
  return MCEstimate{mean, std::sqrt(var / n), values.size(), seed};
}

/// Worker count used when 0 is requested.
inline std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

/**
 * Runs body(i) for i in [0, n) on up to `workers` threads. Indices are
 * handed out dynamically; callers write results by index, so the output
 * does not depend on the schedule. The first exception is rethrown.
 */
template <typename Body>
void parallel_for(std::size_t n, std::size_t workers, Body&& body) {
  if (workers == 0) workers = default_workers();
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(n);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// One-sided upper confidence bound for a binomial proportion with zero
/// hits in n trials: 1 - alpha^{1/n}.
inline double zero_hit_upper_bound(std::size_t n, double alpha = 0.05) {
  return 1.0 - std::pow(alpha, 1.0 / static_cast<double>(n));
}

}  // namespace ldplab

#endif  // LDPLAB_MONTECARLO_HPP
