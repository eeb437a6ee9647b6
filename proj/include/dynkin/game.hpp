#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "dynkin/error.hpp"
#include "dynkin/sim.hpp"

namespace dynkin {

/// Which player is paid when both stop at the same date before the horizon.
enum class TieRule {
  HolderFirst,     // exercise wins ties: the holder receives the lower value
  CancellerFirst,  // cancellation wins ties: the canceller pays the upper value
};

/// Discrete-time Dynkin game on dates 0..M with zero running payoff.
///
/// The minimiser (canceller) stops at sigma and pays upper(sigma, S) if sigma < M;
/// the maximiser (holder) stops at tau and receives lower(tau, S); if neither
/// stops before M the terminal amount is paid. Amounts are undiscounted;
/// step_discount is applied once per date inside the recursions.
///
/// In switching form the cost of switching 0 -> 1 is upper(m, s) and the cost
/// of switching 1 -> 0 is -lower(m, s).
struct GameSpec {
  std::function<double(int, double)> lower;
  std::function<double(int, double)> upper;
  std::function<double(double)> terminal;
  /// Optional closed form for upper - lower; avoids cancellation at extreme states.
  std::function<double(int, double)> gap;
  double step_discount = 1.0;
  int steps = 1;

  /// Throws ValidationError unless lower < upper strictly before the horizon,
  /// and lower <= terminal <= upper at the horizon.
  void check_node(int m, double s, std::size_t path = 0) const {
    const double lo = lower(m, s);
    const double up = upper(m, s);
    auto where = [&] { return " at step " + std::to_string(m) + ", path " + std::to_string(path) + " (s=" + std::to_string(s) + ")"; };
    if (m < steps) {
      const double width = gap ? gap(m, s) : up - lo;
      if (!(width > 0.0)) throw ValidationError("strict gap upper - lower > 0 violated" + where());
    } else {
      const double g = terminal(s);
      if (!(lo <= g && g <= up)) throw ValidationError("terminal sandwich lower <= terminal <= upper violated" + where());
    }
  }

  void check_discount() const {
    if (!(step_discount > 0.0 && step_discount <= 1.0)) throw ValidationError("step discount must lie in (0, 1]");
    if (steps < 1) throw ValidationError("game needs at least one step");
  }

  double switching_cost(int from_mode, int m, double s) const {
    return from_mode == 0 ? upper(m, s) : -lower(m, s);
  }
};

/// Cancellable (game) option: exercise pays G(s), cancellation costs G(s) + penalty.
inline GameSpec cancellable_option(const MarketParams& params, const TimeGrid& grid) {
  params.validate();
  const OptionKind kind = params.kind;
  const double strike = params.strike;
  const double penalty = params.penalty;
  GameSpec spec;
  spec.lower = [kind, strike](int, double s) { return payoff(kind, s, strike); };
  spec.upper = [kind, strike, penalty](int, double s) { return payoff(kind, s, strike) + penalty; };
  spec.terminal = [kind, strike](double s) { return payoff(kind, s, strike); };
  spec.gap = [penalty](int, double) { return penalty; };
  spec.step_discount = std::exp(-params.rate * grid.step());
  spec.steps = grid.steps();
  return spec;
}

/// Plain American option expressed as a game whose canceller never stops.
inline GameSpec american_option(const MarketParams& params, const TimeGrid& grid) {
  GameSpec spec = cancellable_option(params, grid);
  spec.upper = [](int, double) { return std::numeric_limits<double>::infinity(); };
  spec.gap = [](int, double) { return std::numeric_limits<double>::infinity(); };
  return spec;
}

}  // namespace dynkin
