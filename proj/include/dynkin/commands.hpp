#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "dynkin/closedform.hpp"
#include "dynkin/config.hpp"
#include "dynkin/game.hpp"
#include "dynkin/lattice.hpp"
#include "dynkin/lsmc.hpp"
#include "dynkin/parallel.hpp"
#include "dynkin/regress.hpp"
#include "dynkin/sim.hpp"

namespace dynkin {

inline RegressionBasis basis_for(const RunConfig& config) {
  return RegressionBasis{config.basis_degree, config.market.strike};
}

struct SolveReport {
  double mean = 0.0;
  double run_std_dev = 0.0;   // dispersion of the per-run values
  double std_error = 0.0;     // standard error of `mean`
  std::vector<double> run_values;
  std::vector<double> run_errors;  // within-run Monte Carlo standard errors
};

/// Independent LSMC replicas; replica i simulates with derive_seed(config.seed, i).
inline SolveReport cmd_price(const RunConfig& config) {
  config.validate();
  const TimeGrid grid = config.grid();
  const GameSpec spec = config.american ? american_option(config.market, grid) : cancellable_option(config.market, grid);
  const RegressionBasis basis = basis_for(config);

  SolveReport report;
  report.run_values.resize(config.n_runs);
  report.run_errors.resize(config.n_runs);
  parallel_for(config.n_runs, config.threads, [&](std::size_t run) {
    const PathSet paths =
        simulate_paths(config.market, grid, config.n_paths, derive_seed(config.seed, run), config.antithetic);
    const InductionOptions options{.keep_surface = false, .scheme = config.scheme};
    const GameResult result = config.american ? american_backward_induction(paths, spec, basis, options)
                                              : game_backward_induction(paths, spec, basis, options);
    report.run_values[run] = result.v0;
    report.run_errors[run] = result.std_error;
  });

  const double n = static_cast<double>(config.n_runs);
  double sum = 0.0;
  for (double v : report.run_values) sum += v;
  report.mean = sum / n;
  if (config.n_runs > 1) {
    double ss = 0.0;
    for (double v : report.run_values) ss += (v - report.mean) * (v - report.mean);
    report.run_std_dev = std::sqrt(ss / (n - 1.0));
    report.std_error = report.run_std_dev / std::sqrt(n);
  } else {
    report.std_error = report.run_errors.front();
  }
  return report;
}

struct SweepRow {
  double horizon = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  double perpetual = 0.0;
};

/// Horizons T = 0.5 * 2^q for q = 0..sweep_q_max, each priced with cmd_price
/// under the same master seed and step count.
inline std::vector<SweepRow> cmd_sweep(const RunConfig& config) {
  config.validate();
  const double perpetual = perpetual_cancellable(config.market);
  std::vector<SweepRow> rows;
  for (int q = 0; q <= config.sweep_q_max; ++q) {
    RunConfig run = config;
    run.horizon = 0.5 * std::ldexp(1.0, q);
    const SolveReport report = cmd_price(run);
    rows.push_back({run.horizon, report.mean, report.std_error, perpetual});
  }
  return rows;
}

inline std::string format_g10(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

/// CSV with header T,value,std_error,perpetual and LF line endings.
inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "T,value,std_error,perpetual\n";
  for (const auto& r : rows) {
    out += format_g10(r.horizon) + "," + format_g10(r.value) + "," + format_g10(r.std_error) + "," +
           format_g10(r.perpetual) + "\n";
  }
  return out;
}

struct TreeReport {
  double game_value = 0.0;
  double american_value = 0.0;
  double y0 = 0.0;
  double y1 = 0.0;
  double perpetual = 0.0;
};

inline TreeReport cmd_tree(const RunConfig& config) {
  config.validate();
  const TimeGrid grid = config.grid();
  const LatticeModel model(config.market, grid);
  TreeReport report;
  report.game_value = tree_game_value(model, cancellable_option(config.market, grid)).v0;
  report.american_value = tree_american_value(model, american_option(config.market, grid)).v0;
  const TreeSwitching sw = tree_switching_values(model, cancellable_option(config.market, grid));
  report.y0 = sw.y0(0, 0);
  report.y1 = sw.y1(0, 0);
  report.perpetual = perpetual_cancellable(config.market);
  return report;
}

struct Check {
  std::string name;
  bool passed = false;
  double margin = 0.0;     // observed error or violation
  double tolerance = 0.0;  // allowed bound for `margin`
  std::string detail;
};

struct VerifyReport {
  std::vector<Check> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

/// Largest node error of V = Y1 - Y0 and the Mokobodski bounds lower <= Y1 - Y0 <= upper on a tree.
struct TreeIdentityScan {
  double max_identity_error = 0.0;
  double max_sandwich_violation = 0.0;
  std::size_t simultaneous_switch_nodes = 0;
};

inline TreeIdentityScan scan_tree_identities(const LatticeModel& model, const GameSpec& spec) {
  const TreeValues game = tree_game_value(model, spec);
  const TreeSwitching sw = tree_switching_values(model, spec);
  TreeIdentityScan scan;
  for (int m = 0; m <= model.steps(); ++m) {
    for (int j = 0; j <= m; ++j) {
      const double s = model.price(m, j);
      const double diff = sw.y1(m, j) - sw.y0(m, j);
      scan.max_identity_error = std::max(scan.max_identity_error, std::abs(diff - game.values(m, j)));
      const double lo = spec.lower(m, s);
      const double up = m < model.steps() ? spec.upper(m, s) : spec.terminal(s);
      scan.max_sandwich_violation = std::max({scan.max_sandwich_violation, lo - diff, diff - up});
      if (m < model.steps() && sw.switch_from0(m, j) && sw.switch_from1(m, j)) ++scan.simultaneous_switch_nodes;
    }
  }
  return scan;
}

/// Worst violation of lower <= V <= upper over an LSMC surface.
inline double surface_sandwich_violation(const PathSet& paths, const GameSpec& spec, const ValueSurface& surface) {
  double worst = 0.0;
  for (std::size_t p = 0; p < paths.n_paths(); ++p) {
    for (int m = 0; m <= spec.steps; ++m) {
      const double s = paths.at(p, m);
      const double v = surface.game_values(p, m);
      const double up = m < spec.steps ? spec.upper(m, s) : spec.terminal(s);
      worst = std::max({worst, spec.lower(m, s) - v, v - up});
    }
  }
  return worst;
}

namespace detail {

inline Check bound_check(std::string name, double margin, double tolerance, std::string detail = {}) {
  return Check{std::move(name), margin <= tolerance, margin, tolerance, std::move(detail)};
}

}  // namespace detail

/// Runs the invariant suite on the configured market (one LSMC replica with the
/// configured paths and steps, trees for both option kinds) and the closed-form
/// anchors at r = 0.06, vol = 0.4, K = 100, penalty = 5.
inline VerifyReport cmd_verify(const RunConfig& config) {
  config.validate();
  using detail::bound_check;
  VerifyReport report;

  {
    const MarketParams anchor{0.06, 0.4, 100.0, 100.0, 5.0, OptionKind::Put};
    const PerpetualParams perp = perpetual_params(anchor);
    report.checks.push_back(bound_check("anchor_delta_star", std::abs(perp.delta_star - 30.3), 0.05,
                                        "delta* = " + format_g10(perp.delta_star)));
    const double k = perp.k_star.value_or(0.0);
    report.checks.push_back(bound_check("anchor_k_star", std::abs(k - 69.9), 0.05, "k* = " + format_g10(k)));
  }

  const TimeGrid grid = config.grid();
  for (OptionKind kind : {OptionKind::Call, OptionKind::Put}) {
    MarketParams market = config.market;
    market.kind = kind;
    const std::string tag = std::string("_") + to_string(kind);
    const LatticeModel model(market, grid);
    const GameSpec spec = cancellable_option(market, grid);
    const TreeIdentityScan scan = scan_tree_identities(model, spec);
    report.checks.push_back(bound_check("tree_identity" + tag, scan.max_identity_error, 1e-12));
    report.checks.push_back(bound_check("tree_mokobodski" + tag, scan.max_sandwich_violation, 0.0));
    report.checks.push_back(bound_check("tree_no_simultaneous_switch" + tag,
                                        static_cast<double>(scan.simultaneous_switch_nodes), 0.0));

    const TimeGrid small(config.horizon, 8);
    const SaddleReport saddle =
        tree_saddle_check(LatticeModel(market, small), cancellable_option(market, small), 200, config.seed);
    report.checks.push_back(bound_check("saddle_audit" + tag, std::max(saddle.worst_margin(), std::abs(saddle.equilibrium - saddle.v0)),
                                        saddle.tolerance,
                                        std::to_string(saddle.deviations) + " deviations"));
  }

  {
    const GameSpec spec = cancellable_option(config.market, grid);
    const RegressionBasis basis = basis_for(config);
    const PathSet paths = simulate_paths(config.market, grid, config.n_paths, derive_seed(config.seed, 0),
                                         config.antithetic, config.threads);
    const GameResult game = game_backward_induction(paths, spec, basis);
    const SwitchingResult sw = switching_backward_induction(paths, spec, basis);
    report.checks.push_back(bound_check("lsmc_sandwich", surface_sandwich_violation(paths, spec, *game.surface), 0.0));
    report.checks.push_back(bound_check("lsmc_clamp_identity", max_clamp_identity_error(paths, spec, basis, sw), 1e-10));
    report.checks.push_back(bound_check("lsmc_value_identity", std::abs((sw.y1_0 - sw.y0_0) - game.v0), 1e-10,
                                        "v0 = " + format_g10(game.v0)));
  }
  return report;
}

}  // namespace dynkin
