#include "endo/errors.hpp"
#include "endo/estimators.hpp"
#include "endo/rng.hpp"

#include <cmath>

namespace endo::est {

double bootstrap_se(const ScalarEstimator& estimator, const DataView& data, std::size_t replicates,
                    std::uint64_t seed, kernels::Exec exec) {
  if (replicates < 50) {
    throw PreconditionError("bootstrap_se needs at least 50 replicates, got " + std::to_string(replicates));
  }
  const std::size_t n = data.size();
  if (n == 0) throw PreconditionError("bootstrap_se: empty sample");

  std::vector<double> values(replicates, 0.0);
  std::vector<char> failed(replicates, 0);
  kernels::for_each_index(replicates, exec, [&](std::size_t b) {
    Rng rng = make_rng(derive_seed(seed, b));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = pick(rng);
    try {
      values[b] = estimator(data.resample(rows));
      if (!std::isfinite(values[b])) failed[b] = 1;
    } catch (const Error&) {
      failed[b] = 1;
    }
  });

  std::size_t failures = 0, count = 0;
  double mean = 0.0, m2 = 0.0;
  for (std::size_t b = 0; b < replicates; ++b) {
    if (failed[b]) {
      ++failures;
      continue;
    }
    ++count;
    const double delta = values[b] - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (values[b] - mean);
  }
  if (static_cast<double>(failures) > 0.1 * static_cast<double>(replicates)) {
    throw InstabilityError("bootstrap: estimator failed in " + std::to_string(failures) + " of " +
                           std::to_string(replicates) + " replicates");
  }
  return count > 1 ? std::sqrt(m2 / static_cast<double>(count - 1)) : 0.0;
}

} // namespace endo::est
