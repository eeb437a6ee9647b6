#pragma once

#include <cmath>
#include <optional>

#include "dynkin/error.hpp"
#include "dynkin/sim.hpp"

namespace dynkin {

struct PerpetualParams {
  double gamma_exp = 0.0;              // r / vol^2 + 1/2
  double delta_star = 0.0;             // perpetual American put value at the strike
  std::optional<double> k_star;        // lower exercise boundary, only when penalty < delta_star
};

/// Perpetual American put: K - s below S* = beta K / (beta + 1), (K - S*)(s/S*)^(-beta) above, beta = 2r / vol^2.
inline double perpetual_american_put(const MarketParams& params, double s) {
  if (!(params.rate > 0.0) || !(params.volatility > 0.0)) throw DomainError("perpetual put needs rate > 0 and vol > 0");
  const double beta = 2.0 * params.rate / (params.volatility * params.volatility);
  const double boundary = beta * params.strike / (beta + 1.0);
  if (s <= boundary) return params.strike - s;
  return (params.strike - boundary) * std::pow(s / boundary, -beta);
}

inline double perpetual_gamma(const MarketParams& params) {
  return params.rate / (params.volatility * params.volatility) + 0.5;
}

/// Residual of y^(2g) + 2g - 1 - 2g (1 + delta/K) y; its root in (0,1) is k*/K.
inline double kstar_residual(const MarketParams& params, double y) {
  const double g = perpetual_gamma(params);
  return std::pow(y, 2.0 * g) + 2.0 * g - 1.0 - 2.0 * g * (1.0 + params.penalty / params.strike) * y;
}

/// Bisection for k* on (0, K). Requires penalty < delta*.
inline double solve_kstar(const MarketParams& params) {
  params.validate();
  const double delta_star = perpetual_american_put(params, params.strike);
  if (params.penalty >= delta_star)
    throw DomainError("k* exists only for penalty < delta* = " + std::to_string(delta_star));
  double lo = 0.0;  // residual -> 2g - 1 > 0 as y -> 0+
  double hi = 1.0;  // residual = -2g penalty / K < 0
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (kstar_residual(params, mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return params.strike * 0.5 * (lo + hi);
}

inline PerpetualParams perpetual_params(const MarketParams& params) {
  PerpetualParams out;
  out.gamma_exp = perpetual_gamma(params);
  out.delta_star = perpetual_american_put(params, params.strike);
  if (params.penalty < out.delta_star) out.k_star = solve_kstar(params);
  return out;
}

/// Perpetual cancellable call: penalty * S0 / K up to the strike, S0 - K + penalty beyond.
inline double perpetual_cancellable_call(const MarketParams& params) {
  params.validate();
  if (params.spot <= params.strike) return params.penalty * params.spot / params.strike;
  return params.spot - params.strike + params.penalty;
}

/// Perpetual cancellable put evaluated at s (defaults to the spot).
inline double perpetual_cancellable_put(const MarketParams& params, std::optional<double> at = std::nullopt) {
  params.validate();
  const double s = at.value_or(params.spot);
  const double strike = params.strike;
  const double delta = params.penalty;
  const double delta_star = perpetual_american_put(params, strike);
  if (delta >= delta_star) return perpetual_american_put(params, s);

  const double g = perpetual_gamma(params);
  const double k = solve_kstar(params);
  if (s <= k) return strike - s;
  if (s >= strike) return delta * std::pow(s / strike, -(2.0 * g - 1.0));

  const double x_strike = s / strike;
  const double x_k = s / k;
  const double denom = std::pow(k / strike, g) - std::pow(k / strike, -g);
  const double exercise_part =
      (strike - k) * std::pow(x_k, -(g - 1.0)) * (std::pow(x_strike, g) - std::pow(x_strike, -g)) / denom;
  const double cancel_part =
      delta * std::pow(x_strike, -(g - 1.0)) * (std::pow(x_k, -g) - std::pow(x_k, g)) / denom;
  return exercise_part + cancel_part;
}

/// Perpetual value for the option kind in `params`.
inline double perpetual_cancellable(const MarketParams& params) {
  return params.kind == OptionKind::Call ? perpetual_cancellable_call(params) : perpetual_cancellable_put(params);
}

}  // namespace dynkin
