#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include "skit/common.hpp"

namespace skit {

inline void check_payoff_range(double f) {
  if (!(std::abs(f) <= 1.0)) throw InputError("betting update: |payoff| must be <= 1");
}

/// Online Newton step over the exp-concave log-wealth objective. Keeps
/// lambda in [0, 1/2] so every wealth factor stays >= 1/2.
///
/// The update ascends log(1 + lambda f): z = f/(1 + lambda f),
/// lambda <- clip(lambda + (2/(2 - log 3)) z / a). Some presentations write
/// the step with the opposite sign convention (descent on -log wealth with
/// z = f/(1 - lambda f)); taken literally that drives lambda to zero on
/// winning streaks, so the ascent form is used here.
struct OnsState {
  double lambda{0.0};
  double a{1.0};

  void update(double f) {
    check_payoff_range(f);
    const double z = f / (1.0 + lambda * f);
    a += z * z;
    const double step = 2.0 / (2.0 - std::log(3.0));
    lambda = std::clamp(lambda + step * z / a, 0.0, 0.5);
  }
};

/// aGRAPA: lambda as the truncated ratio of running payoff moments.
struct AgrapaState {
  double mu1{0.0};  // sum of payoffs
  double mu2{1.0};  // 1 + sum of squared payoffs
  double c{0.9};
  double lambda{0.0};

  void update(double f) {
    check_payoff_range(f);
    mu1 += f;
    mu2 += f * f;
    lambda = std::clamp(mu1 / mu2, 0.0, c);
  }
};

/// Mixture wealth over a fixed lambda grid; the session wealth is the
/// arithmetic mean of the per-lambda wealth processes. Tracked in log space.
struct MixtureState {
  std::vector<double> grid;
  std::vector<double> log_wealths;

  static std::vector<double> default_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 19; ++i) g.push_back(0.05 * i);
    return g;
  }

  explicit MixtureState(std::vector<double> grid_ = default_grid()) : grid(std::move(grid_)) {
    for (double l : grid) {
      if (!(l >= 0.0 && l < 1.0)) throw InputError("mixture grid values must lie in [0,1)");
    }
    log_wealths.assign(grid.size(), 0.0);
  }

  /// Multiplies every per-lambda wealth by (1 + lambda f); returns the log of
  /// the mixture wealth.
  double update(double f) {
    check_payoff_range(f);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      log_wealths[j] += std::log1p(grid[j] * f);
    }
    return log_mixed_wealth();
  }

  double log_mixed_wealth() const {
    double mx = -std::numeric_limits<double>::infinity();
    for (double lw : log_wealths) mx = std::max(mx, lw);
    double s = 0.0;
    for (double lw : log_wealths) s += std::exp(lw - mx);
    return mx + std::log(s / static_cast<double>(log_wealths.size()));
  }
};

struct FixedState {
  double lambda{0.0};
};

using BettorState = std::variant<OnsState, AgrapaState, MixtureState, FixedState>;

/// Oracle betting fraction E[f] / (E[f] + E[f^2]); test-fixture use only.
inline double oracle_lambda(double mean_f, double mean_f2) {
  if (!(mean_f + mean_f2 > 0.0)) throw InputError("oracle_lambda: denominator must be positive");
  return mean_f / (mean_f + mean_f2);
}

}  // namespace skit
