#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "predin/common.hpp"

namespace predin {

/// Loss value plus the piecewise regime it was evaluated in.
struct ProbeResult {
  double value = 0.0;
  std::vector<std::uint8_t> regime;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  Eigen::Index worst_coordinate = -1;
  int checked = 0;
  int exempt_small = 0;  // both |analytic| and |numeric| below the absolute floor
  int exempt_kink = 0;   // perturbation crossed a max/clamp/branch boundary
};

struct GradCheckOptions {
  double epsilon = 1e-4;
  int min_coordinates = 200;
  double abs_floor = 1e-8;
  std::uint64_t seed = 0;
};

/// Central differences (f(t+e) - f(t-e)) / 2e against `analytic` on a sampled coordinate subset
/// (all coordinates when there are fewer than min_coordinates). A coordinate whose perturbation
/// changes the loss regime sits next to a kink and is exempt.
inline GradCheckReport finite_diff_check(const std::function<ProbeResult(const Eigen::VectorXd&)>& loss,
                                         const Eigen::VectorXd& theta,
                                         const Eigen::VectorXd& analytic,
                                         const GradCheckOptions& options = {}) {
  if (theta.size() != analytic.size()) throw InvalidArgument("gradient length mismatch");
  std::vector<Eigen::Index> coords(static_cast<std::size_t>(theta.size()));
  std::iota(coords.begin(), coords.end(), Eigen::Index{0});
  if (static_cast<Eigen::Index>(options.min_coordinates) < theta.size()) {
    Rng rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(static_cast<std::size_t>(options.min_coordinates));
    std::sort(coords.begin(), coords.end());
  }
  const auto base_regime = loss(theta).regime;
  GradCheckReport report;
  Eigen::VectorXd probe = theta;
  for (Eigen::Index c : coords) {
    probe(c) = theta(c) + options.epsilon;
    const ProbeResult plus = loss(probe);
    probe(c) = theta(c) - options.epsilon;
    const ProbeResult minus = loss(probe);
    probe(c) = theta(c);
    if (plus.regime != base_regime || minus.regime != base_regime) {
      ++report.exempt_kink;
      continue;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * options.epsilon);
    const double a = analytic(c);
    if (std::abs(a) < options.abs_floor && std::abs(numeric) < options.abs_floor) {
      ++report.exempt_small;
      continue;
    }
    const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
    ++report.checked;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = c;
    }
  }
  return report;
}

}  // namespace predin
