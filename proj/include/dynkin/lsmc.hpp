#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dynkin/error.hpp"
#include "dynkin/game.hpp"
#include "dynkin/regress.hpp"
#include "dynkin/sim.hpp"

namespace dynkin {

/// Per-path, per-date table with the same layout as PathSet.
template <typename T>
class PathGrid {
 public:
  PathGrid() = default;
  PathGrid(std::size_t n_paths, int steps, T fill = T{})
      : n_paths_(n_paths), steps_(steps), data_(n_paths * static_cast<std::size_t>(steps + 1), fill) {}

  std::size_t n_paths() const { return n_paths_; }
  int steps() const { return steps_; }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t path, int m) { return data_[index(path, m)]; }
  const T& operator()(std::size_t path, int m) const { return data_[index(path, m)]; }

 private:
  std::size_t index(std::size_t path, int m) const {
    return path * static_cast<std::size_t>(steps_ + 1) + static_cast<std::size_t>(m);
  }

  std::size_t n_paths_ = 0;
  int steps_ = 0;
  std::vector<T> data_;
};

/// Absolute tolerance for deciding that a value sits on a barrier.
inline constexpr double kBoundaryTolerance = 1e-9;

struct ValueSurface {
  PathGrid<double> game_values;
  PathGrid<std::uint8_t> cancel_region;    // value == upper, dates before the horizon only
  PathGrid<std::uint8_t> exercise_region;  // value == lower
};

struct GameResult {
  std::optional<ValueSurface> surface;
  double v0 = 0.0;
  double std_error = 0.0;      // standard error of the date-0 sample mean
  double continuation0 = 0.0;  // date-0 sample mean before clamping
};

struct SwitchingResult {
  PathGrid<double> y0;
  PathGrid<double> y1;
  double y0_0 = 0.0;
  double y1_0 = 0.0;
};

struct StoppingPair {
  std::vector<int> sigma;  // per path cancellation date, M when never
  std::vector<int> tau;    // per path exercise date, M when never
};

/// How the value carried back along each path is formed.
enum class ContinuationScheme {
  /// Carry the clamped regression estimate min(U, max(L, E^[beta V_{m+1}])) itself.
  FittedValue,
  /// Use the clamped estimate only to decide stop/cancel/continue and carry the
  /// path's realised discounted cash flow when continuing (Longstaff-Schwartz form).
  RealizedCashflow,
};

struct InductionOptions {
  bool keep_surface = true;
  ContinuationScheme scheme = ContinuationScheme::FittedValue;
};

namespace detail {

/// Sample mean and its standard error; antithetic pairs are averaged first
/// so the error reflects the pairs' actual independence.
inline std::pair<double, double> mean_and_error(const std::vector<double>& x, bool antithetic) {
  const std::size_t n = x.size();
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / static_cast<double>(n);

  std::size_t count = n;
  double ss = 0.0;
  if (antithetic) {
    count = n / 2;
    for (std::size_t k = 0; k < count; ++k) {
      const double d = 0.5 * (x[2 * k] + x[2 * k + 1]) - mean;
      ss += d * d;
    }
  } else {
    for (double v : x) ss += (v - mean) * (v - mean);
  }
  const double err = count > 1 ? std::sqrt(ss / static_cast<double>(count - 1) / static_cast<double>(count)) : 0.0;
  return {mean, err};
}

inline void check_shapes(const PathSet& paths, const GameSpec& spec) {
  spec.check_discount();
  if (paths.steps() != spec.steps)
    throw ValidationError("path set has " + std::to_string(paths.steps()) + " steps but the game has " +
                          std::to_string(spec.steps));
}

/// Shared driver for the clamped (game) and upper-unclamped (American) inductions.
inline GameResult backward_induction(const PathSet& paths, const GameSpec& spec, const RegressionBasis& basis,
                                     bool clamp_upper, const InductionOptions& options) {
  check_shapes(paths, spec);
  const std::size_t n = paths.n_paths();
  const int steps = spec.steps;
  const double beta = spec.step_discount;

  GameResult result;
  if (options.keep_surface) {
    result.surface = ValueSurface{PathGrid<double>(n, steps), PathGrid<std::uint8_t>(n, steps),
                                  PathGrid<std::uint8_t>(n, steps)};
  }

  constexpr double kNoBarrier = std::numeric_limits<double>::infinity();
  auto record = [&](std::size_t path, int m, double value, double lo, double up) {
    if (!result.surface) return;
    result.surface->game_values(path, m) = value;
    result.surface->exercise_region(path, m) = std::abs(value - lo) <= kBoundaryTolerance;
    result.surface->cancel_region(path, m) = m < steps && std::abs(value - up) <= kBoundaryTolerance;
  };

  std::vector<double> next(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double s = paths.at(p, steps);
    if (clamp_upper) spec.check_node(steps, s, p);
    next[p] = spec.terminal(s);
    record(p, steps, next[p], spec.lower(steps, s), kNoBarrier);
  }

  const bool realized = options.scheme == ContinuationScheme::RealizedCashflow;
  std::vector<double> discounted(n);
  for (int m = steps - 1; m >= 1; --m) {
    for (std::size_t p = 0; p < n; ++p) discounted[p] = beta * next[p];
    const std::vector<double> states = paths.slice(m);
    const std::vector<double> cont = LeastSquaresProjector(states, basis).fitted(discounted);
    for (std::size_t p = 0; p < n; ++p) {
      const double s = states[p];
      if (clamp_upper) spec.check_node(m, s, p);
      const double lo = spec.lower(m, s);
      double v = std::max(lo, cont[p]);
      const double up = clamp_upper ? spec.upper(m, s) : kNoBarrier;
      if (clamp_upper) v = std::min(up, v);
      record(p, m, v, lo, up);
      if (!realized) {
        next[p] = v;
      } else if (std::abs(v - up) <= kBoundaryTolerance) {
        next[p] = up;
      } else if (std::abs(v - lo) <= kBoundaryTolerance) {
        next[p] = lo;
      } else {
        next[p] = discounted[p];
      }
    }
  }

  // Date 0: the information set is trivial, so the conditional expectation is the sample mean.
  for (std::size_t p = 0; p < n; ++p) discounted[p] = beta * next[p];
  const auto [mean, err] = mean_and_error(discounted, paths.antithetic());
  const double s0 = paths.at(0, 0);
  if (clamp_upper) spec.check_node(0, s0, 0);
  const double lo = spec.lower(0, s0);
  double v0 = std::max(lo, mean);
  const double up = clamp_upper ? spec.upper(0, s0) : kNoBarrier;
  if (clamp_upper) v0 = std::min(up, v0);
  for (std::size_t p = 0; p < n; ++p) record(p, 0, v0, lo, up);

  result.v0 = v0;
  result.std_error = err;
  result.continuation0 = mean;
  return result;
}

}  // namespace detail

/// Regression backward induction V_m = min(U, max(L, E^[beta V_{m+1} | S_m])).
/// The surface always holds the clamped estimates; options.scheme selects what
/// is propagated to the previous date.
inline GameResult game_backward_induction(const PathSet& paths, const GameSpec& spec, const RegressionBasis& basis,
                                          const InductionOptions& options = {}) {
  return detail::backward_induction(paths, spec, basis, /*clamp_upper=*/true, options);
}

/// Same recursion without the upper barrier: the American option on `spec.lower`.
inline GameResult american_backward_induction(const PathSet& paths, const GameSpec& spec,
                                              const RegressionBasis& basis, const InductionOptions& options = {}) {
  return detail::backward_induction(paths, spec, basis, /*clamp_upper=*/false, options);
}

/// Two-mode switching recursion
///   Y^i_m = max( E[beta Y^i_{m+1}], -cost_{i,1-i}(m) + E[beta Y^{1-i}_{m+1}] ),
/// with Y^1_M = terminal and Y^0_M = 0. Each date uses one projector for both
/// modes, built exactly as in game_backward_induction.
inline SwitchingResult switching_backward_induction(const PathSet& paths, const GameSpec& spec,
                                                    const RegressionBasis& basis) {
  detail::check_shapes(paths, spec);
  const std::size_t n = paths.n_paths();
  const int steps = spec.steps;
  const double beta = spec.step_discount;

  SwitchingResult result{PathGrid<double>(n, steps), PathGrid<double>(n, steps)};
  for (std::size_t p = 0; p < n; ++p) {
    const double s = paths.at(p, steps);
    spec.check_node(steps, s, p);
    result.y1(p, steps) = spec.terminal(s);
    result.y0(p, steps) = 0.0;
  }

  std::vector<double> d0(n), d1(n);
  auto discount_next = [&](int m) {
    for (std::size_t p = 0; p < n; ++p) {
      d0[p] = beta * result.y0(p, m + 1);
      d1[p] = beta * result.y1(p, m + 1);
    }
  };

  for (int m = steps - 1; m >= 1; --m) {
    discount_next(m);
    const std::vector<double> states = paths.slice(m);
    const LeastSquaresProjector projector(states, basis);
    const std::vector<double> c0 = projector.fitted(d0);
    const std::vector<double> c1 = projector.fitted(d1);
    for (std::size_t p = 0; p < n; ++p) {
      const double s = states[p];
      spec.check_node(m, s, p);
      result.y0(p, m) = std::max(c0[p], -spec.switching_cost(0, m, s) + c1[p]);
      result.y1(p, m) = std::max(c1[p], -spec.switching_cost(1, m, s) + c0[p]);
    }
  }

  discount_next(0);
  double c0 = 0.0, c1 = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    c0 += d0[p];
    c1 += d1[p];
  }
  c0 /= static_cast<double>(n);
  c1 /= static_cast<double>(n);
  const double s0 = paths.at(0, 0);
  spec.check_node(0, s0, 0);
  result.y0_0 = std::max(c0, -spec.switching_cost(0, 0, s0) + c1);
  result.y1_0 = std::max(c1, -spec.switching_cost(1, 0, s0) + c0);
  for (std::size_t p = 0; p < n; ++p) {
    result.y0(p, 0) = result.y0_0;
    result.y1(p, 0) = result.y1_0;
  }
  return result;
}

/// Largest |(Y1 - Y0) - min(U, max(L, E[beta (Y1 - Y0)_{m+1} | S_m]))| over all
/// paths and dates before the horizon, with the conditional expectation of the
/// difference fitted directly (not as a difference of fits).
inline double max_clamp_identity_error(const PathSet& paths, const GameSpec& spec, const RegressionBasis& basis,
                                       const SwitchingResult& sw) {
  const std::size_t n = paths.n_paths();
  const int steps = spec.steps;
  double worst = 0.0;
  std::vector<double> diff(n);
  for (int m = steps - 1; m >= 0; --m) {
    for (std::size_t p = 0; p < n; ++p) diff[p] = spec.step_discount * (sw.y1(p, m + 1) - sw.y0(p, m + 1));
    std::vector<double> cont;
    if (m == 0) {
      double mean = 0.0;
      for (double v : diff) mean += v;
      cont.assign(n, mean / static_cast<double>(n));
    } else {
      cont = LeastSquaresProjector(paths.slice(m), basis).fitted(diff);
    }
    for (std::size_t p = 0; p < n; ++p) {
      const double s = paths.at(p, m);
      const double clamp = std::min(spec.upper(m, s), std::max(spec.lower(m, s), cont[p]));
      worst = std::max(worst, std::abs((sw.y1(p, m) - sw.y0(p, m)) - clamp));
    }
  }
  return worst;
}

/// First dates at which the value surface touches the upper (sigma) and lower
/// (tau) barriers; M where it never does.
inline StoppingPair extract_stopping_pair(const ValueSurface& surface) {
  const std::size_t n = surface.game_values.n_paths();
  const int steps = surface.game_values.steps();
  StoppingPair pair{std::vector<int>(n, steps), std::vector<int>(n, steps)};
  for (std::size_t p = 0; p < n; ++p) {
    for (int m = 0; m < steps; ++m) {
      if (surface.cancel_region(p, m)) {
        pair.sigma[p] = m;
        break;
      }
    }
    for (int m = 0; m <= steps; ++m) {
      if (surface.exercise_region(p, m)) {
        pair.tau[p] = m;
        break;
      }
    }
  }
  return pair;
}

struct PairEvaluation {
  double value = 0.0;
  double std_error = 0.0;
};

/// Sample mean of the discounted game cash flow realised by a stopping pair.
inline PairEvaluation evaluate_pair(const PathSet& paths, const GameSpec& spec, const StoppingPair& pair,
                                    TieRule ties = TieRule::HolderFirst) {
  detail::check_shapes(paths, spec);
  const std::size_t n = paths.n_paths();
  const int steps = spec.steps;
  if (pair.sigma.size() != n || pair.tau.size() != n)
    throw ValidationError("stopping pair size does not match the path set");

  std::vector<double> discount(static_cast<std::size_t>(steps) + 1);
  for (int m = 0; m <= steps; ++m) discount[static_cast<std::size_t>(m)] = std::pow(spec.step_discount, m);

  std::vector<double> flows(n);
  for (std::size_t p = 0; p < n; ++p) {
    const int sigma = pair.sigma[p];
    const int tau = pair.tau[p];
    if (sigma < 0 || sigma > steps || tau < 0 || tau > steps)
      throw ValidationError("stopping index out of range on path " + std::to_string(p));
    const bool cancel_first = ties == TieRule::HolderFirst ? sigma < tau : sigma <= tau;
    double flow = 0.0;
    if (sigma < steps && cancel_first) {
      flow = discount[static_cast<std::size_t>(sigma)] * spec.upper(sigma, paths.at(p, sigma));
    } else if (tau < steps && (ties == TieRule::HolderFirst ? tau <= sigma : tau < sigma)) {
      flow = discount[static_cast<std::size_t>(tau)] * spec.lower(tau, paths.at(p, tau));
    } else {
      flow = discount[static_cast<std::size_t>(steps)] * spec.terminal(paths.at(p, steps));
    }
    flows[p] = flow;
  }
  const auto [mean, err] = detail::mean_and_error(flows, paths.antithetic());
  return {mean, err};
}

}  // namespace dynkin
