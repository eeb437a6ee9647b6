#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dynkin/error.hpp"
#include "dynkin/game.hpp"
#include "dynkin/sim.hpp"

namespace dynkin {

/// Values on the recombining tree, node (m, j) for 0 <= j <= m <= M.
template <typename T>
class Triangle {
 public:
  Triangle() = default;
  Triangle(int steps, T fill = T{})
      : steps_(steps), data_(static_cast<std::size_t>(steps + 1) * static_cast<std::size_t>(steps + 2) / 2, fill) {}

  int steps() const { return steps_; }
  T& operator()(int m, int j) { return data_[index(m, j)]; }
  const T& operator()(int m, int j) const { return data_[index(m, j)]; }

 private:
  static std::size_t index(int m, int j) {
    return static_cast<std::size_t>(m) * static_cast<std::size_t>(m + 1) / 2 + static_cast<std::size_t>(j);
  }

  int steps_ = 0;
  std::vector<T> data_;
};

using NodeMask = Triangle<std::uint8_t>;

/// Cox-Ross-Rubinstein tree: u = exp(vol sqrt(h)), d = 1/u, q = (exp(r h) - d) / (u - d).
/// Node price S(m, j) = S0 u^j d^(m-j).
class LatticeModel {
 public:
  LatticeModel(const MarketParams& params, const TimeGrid& grid) : params_(params), grid_(grid) {
    params.validate();
    const double h = grid.step();
    up_ = std::exp(params.volatility * std::sqrt(h));
    down_ = 1.0 / up_;
    prob_up_ = (std::exp(params.rate * h) - down_) / (up_ - down_);
    discount_ = std::exp(-params.rate * h);
    if (!(prob_up_ > 0.0 && prob_up_ < 1.0))
      throw ConfigError("lattice probability q = " + std::to_string(prob_up_) +
                        " outside (0,1); refine the time step");
  }

  const MarketParams& params() const { return params_; }
  const TimeGrid& grid() const { return grid_; }
  int steps() const { return grid_.steps(); }
  double up() const { return up_; }
  double down() const { return down_; }
  double prob_up() const { return prob_up_; }
  double step_discount() const { return discount_; }

  double price(int m, int j) const { return params_.spot * std::pow(up_, 2 * j - m); }

  /// Discounted one-step expectation from node (m, j) of a function of the successors.
  template <typename Next>
  double expect(int m, int j, Next&& next) const {
    return discount_ * (prob_up_ * next(m + 1, j + 1) + (1.0 - prob_up_) * next(m + 1, j));
  }

  /// Probability of reaching node (m, j) from the root.
  std::vector<double> level_probabilities(int m) const {
    std::vector<double> prob(static_cast<std::size_t>(m) + 1);
    double log_choose = 0.0;  // log C(m, j)
    for (int j = 0; j <= m; ++j) {
      if (j > 0) log_choose += std::log(static_cast<double>(m - j + 1)) - std::log(static_cast<double>(j));
      prob[static_cast<std::size_t>(j)] =
          std::exp(log_choose + j * std::log(prob_up_) + (m - j) * std::log1p(-prob_up_));
    }
    return prob;
  }

 private:
  MarketParams params_;
  TimeGrid grid_;
  double up_ = 0.0;
  double down_ = 0.0;
  double prob_up_ = 0.0;
  double discount_ = 0.0;
};

struct TreeValues {
  Triangle<double> values;
  double v0 = 0.0;
};

namespace detail {

inline void check_tree_game(const LatticeModel& model, const GameSpec& spec) {
  spec.check_discount();
  if (spec.steps != model.steps())
    throw ValidationError("game has " + std::to_string(spec.steps) + " steps but the lattice has " +
                          std::to_string(model.steps()));
}

inline TreeValues tree_recursion(const LatticeModel& model, const GameSpec& spec, bool clamp_upper) {
  check_tree_game(model, spec);
  const int steps = model.steps();
  TreeValues out{Triangle<double>(steps)};
  Triangle<double>& v = out.values;
  for (int j = 0; j <= steps; ++j) {
    const double s = model.price(steps, j);
    if (clamp_upper) spec.check_node(steps, s);
    v(steps, j) = spec.terminal(s);
  }
  for (int m = steps - 1; m >= 0; --m) {
    for (int j = 0; j <= m; ++j) {
      const double s = model.price(m, j);
      const double cont = model.expect(m, j, [&](int a, int b) { return v(a, b); });
      double value = std::max(spec.lower(m, s), cont);
      if (clamp_upper) {
        spec.check_node(m, s);
        value = std::min(spec.upper(m, s), value);
      }
      v(m, j) = value;
    }
  }
  out.v0 = v(0, 0);
  return out;
}

}  // namespace detail

/// Exact game value V(m,j) = min(U, max(L, e^{-rh} E[V(m+1, .)])).
inline TreeValues tree_game_value(const LatticeModel& model, const GameSpec& spec) {
  return detail::tree_recursion(model, spec, /*clamp_upper=*/true);
}

/// American value of the lower payoff, i.e. the game recursion without the upper barrier.
inline TreeValues tree_american_value(const LatticeModel& model, const GameSpec& spec) {
  return detail::tree_recursion(model, spec, /*clamp_upper=*/false);
}

struct TreeSwitching {
  Triangle<double> y0;
  Triangle<double> y1;
  NodeMask switch_from0;  // switching out of mode 0 is strictly optimal
  NodeMask switch_from1;  // switching out of mode 1 is strictly optimal
};

/// Exact-expectation switching values. Ties are resolved toward staying.
inline TreeSwitching tree_switching_values(const LatticeModel& model, const GameSpec& spec) {
  detail::check_tree_game(model, spec);
  const int steps = model.steps();
  TreeSwitching out{Triangle<double>(steps), Triangle<double>(steps), NodeMask(steps), NodeMask(steps)};
  for (int j = 0; j <= steps; ++j) {
    const double s = model.price(steps, j);
    spec.check_node(steps, s);
    out.y1(steps, j) = spec.terminal(s);
    out.y0(steps, j) = 0.0;
  }
  for (int m = steps - 1; m >= 0; --m) {
    for (int j = 0; j <= m; ++j) {
      const double s = model.price(m, j);
      spec.check_node(m, s);
      const double c0 = model.expect(m, j, [&](int a, int b) { return out.y0(a, b); });
      const double c1 = model.expect(m, j, [&](int a, int b) { return out.y1(a, b); });
      const double to1 = -spec.switching_cost(0, m, s) + c1;
      const double to0 = -spec.switching_cost(1, m, s) + c0;
      out.switch_from0(m, j) = to1 > c0;
      out.switch_from1(m, j) = to0 > c1;
      out.y0(m, j) = std::max(c0, to1);
      out.y1(m, j) = std::max(c1, to0);
    }
  }
  return out;
}

/// State-feedback switching control: in mode i at node (m, j) with m < M,
/// switch to 1-i when switch_from[i](m, j) is set. At most one switch per node.
struct SwitchingPolicy {
  NodeMask switch_from[2];

  explicit SwitchingPolicy(int steps) : switch_from{NodeMask(steps), NodeMask(steps)} {}
};

/// Debut-time policy read off the exact switching values.
inline SwitchingPolicy debut_policy(const TreeSwitching& sw) {
  SwitchingPolicy policy(sw.y0.steps());
  policy.switch_from[0] = sw.switch_from0;
  policy.switch_from[1] = sw.switch_from1;
  return policy;
}

/// Open-loop switching schedule (tau_n, iota_n), n >= 0, on lattice dates.
/// entries[0] must be (0, initial_mode); subsequent modes alternate, dates are
/// non-decreasing and strictly before the horizon.
struct SwitchingSchedule {
  std::vector<std::pair<int, int>> entries;
};

inline void validate_schedule(const SwitchingSchedule& schedule, int steps, int initial_mode) {
  if (initial_mode != 0 && initial_mode != 1) throw ValidationError("initial mode must be 0 or 1");
  const auto& e = schedule.entries;
  if (e.empty() || e.front().first != 0 || e.front().second != initial_mode)
    throw ValidationError("schedule must start with (0, initial_mode)");
  if (e.size() - 1 > static_cast<std::size_t>(steps))
    throw ValidationError("schedule has more than M switches");
  for (std::size_t n = 1; n < e.size(); ++n) {
    if (e[n].first < e[n - 1].first) throw ValidationError("schedule dates must be non-decreasing");
    if (e[n].first >= steps) throw ValidationError("switches must happen before the horizon");
    const int expected = n % 2 == 0 ? initial_mode : 1 - initial_mode;
    if (e[n].second != expected) throw ValidationError("schedule modes must alternate");
  }
}

/// Exact expected reward of an open-loop schedule: terminal reward of the mode
/// held at the horizon minus discounted switching costs paid before it.
inline double evaluate_switching_control(const LatticeModel& model, const GameSpec& spec,
                                         const SwitchingSchedule& schedule, int initial_mode) {
  detail::check_tree_game(model, spec);
  const int steps = model.steps();
  validate_schedule(schedule, steps, initial_mode);

  double total = 0.0;
  int mode = initial_mode;
  for (std::size_t n = 1; n < schedule.entries.size(); ++n) {
    const auto [date, to_mode] = schedule.entries[n];
    if (date < steps) {
      const auto prob = model.level_probabilities(date);
      double cost = 0.0;
      for (int j = 0; j <= date; ++j) cost += prob[static_cast<std::size_t>(j)] * spec.switching_cost(mode, date, model.price(date, j));
      total -= std::pow(model.step_discount(), date) * cost;
    }
    mode = to_mode;
  }
  if (mode == 1) {
    const auto prob = model.level_probabilities(steps);
    double reward = 0.0;
    for (int j = 0; j <= steps; ++j) reward += prob[static_cast<std::size_t>(j)] * spec.terminal(model.price(steps, j));
    total += std::pow(model.step_discount(), steps) * reward;
  }
  return total;
}

/// Exact expected reward of a state-feedback switching policy started in initial_mode.
inline double evaluate_switching_control(const LatticeModel& model, const GameSpec& spec,
                                         const SwitchingPolicy& policy, int initial_mode) {
  detail::check_tree_game(model, spec);
  if (initial_mode != 0 && initial_mode != 1) throw ValidationError("initial mode must be 0 or 1");
  const int steps = model.steps();
  if (policy.switch_from[0].steps() != steps || policy.switch_from[1].steps() != steps)
    throw ValidationError("policy size does not match the lattice");

  Triangle<double> w[2] = {Triangle<double>(steps), Triangle<double>(steps)};
  for (int j = 0; j <= steps; ++j) {
    w[1](steps, j) = spec.terminal(model.price(steps, j));
    w[0](steps, j) = 0.0;
  }
  for (int m = steps - 1; m >= 0; --m) {
    for (int j = 0; j <= m; ++j) {
      const double s = model.price(m, j);
      double cont[2];
      for (int i = 0; i < 2; ++i) cont[i] = model.expect(m, j, [&](int a, int b) { return w[i](a, b); });
      for (int i = 0; i < 2; ++i) {
        w[i](m, j) = policy.switch_from[i](m, j) ? -spec.switching_cost(i, m, s) + cont[1 - i] : cont[i];
      }
    }
  }
  return w[initial_mode](0, 0);
}

/// Exact game payoff from the root when the canceller stops on first entry into
/// `cancel` and the holder on first entry into `exercise` (dates before M only).
inline double evaluate_stopping_regions(const LatticeModel& model, const GameSpec& spec, const NodeMask& cancel,
                                        const NodeMask& exercise, TieRule ties = TieRule::HolderFirst) {
  const int steps = model.steps();
  std::vector<double> level(static_cast<std::size_t>(steps) + 1);
  for (int j = 0; j <= steps; ++j) level[static_cast<std::size_t>(j)] = spec.terminal(model.price(steps, j));
  const double q = model.prob_up();
  const double beta = model.step_discount();
  for (int m = steps - 1; m >= 0; --m) {
    for (int j = 0; j <= m; ++j) {
      const bool c = cancel(m, j) != 0;
      const bool e = exercise(m, j) != 0;
      double value;
      if (c && e) {
        value = ties == TieRule::HolderFirst ? spec.lower(m, model.price(m, j)) : spec.upper(m, model.price(m, j));
      } else if (c) {
        value = spec.upper(m, model.price(m, j));
      } else if (e) {
        value = spec.lower(m, model.price(m, j));
      } else {
        value = beta * (q * level[static_cast<std::size_t>(j) + 1] + (1.0 - q) * level[static_cast<std::size_t>(j)]);
      }
      level[static_cast<std::size_t>(j)] = value;
    }
  }
  return level[0];
}

/// Debut regions of a game-value tree: where V touches U (cancel) and L (exercise).
inline std::pair<NodeMask, NodeMask> debut_regions(const LatticeModel& model, const GameSpec& spec,
                                                   const Triangle<double>& values) {
  const int steps = model.steps();
  NodeMask cancel(steps), exercise(steps);
  for (int m = 0; m < steps; ++m) {
    for (int j = 0; j <= m; ++j) {
      const double s = model.price(m, j);
      cancel(m, j) = std::abs(values(m, j) - spec.upper(m, s)) <= 1e-9;
      exercise(m, j) = std::abs(values(m, j) - spec.lower(m, s)) <= 1e-9;
    }
  }
  return {cancel, exercise};
}

struct SaddleReport {
  double v0 = 0.0;                // tree game value at the root
  double equilibrium = 0.0;       // D(sigma*, tau*)
  double worst_holder_gain = 0.0; // max over tau of D(sigma*, tau) - D(sigma*, tau*)
  double worst_writer_gain = 0.0; // max over sigma of D(sigma*, tau*) - D(sigma, tau*)
  std::size_t deviations = 0;
  double tolerance = 1e-10;
  bool passed = false;

  double worst_margin() const { return std::max(worst_holder_gain, worst_writer_gain); }
};

namespace detail {

/// Calls visit(mask) for every monotone threshold region: at each date m < M the
/// region is either {j <= k_m} or {j >= k_m}, over all choices of k_m (including empty).
template <typename Visit>
void for_each_threshold_region(int steps, Visit&& visit) {
  for (int orientation = 0; orientation < 2; ++orientation) {
    // k[m] in [0, m+1]: lower orientation takes j < k[m], upper takes j >= k[m].
    std::vector<int> k(static_cast<std::size_t>(steps), 0);
    NodeMask mask(steps);
    for (;;) {
      for (int m = 0; m < steps; ++m) {
        for (int j = 0; j <= m; ++j) {
          const int km = k[static_cast<std::size_t>(m)];
          mask(m, j) = orientation == 0 ? j < km : j >= km;
        }
      }
      visit(mask);
      int m = 0;
      while (m < steps && ++k[static_cast<std::size_t>(m)] > m + 1) k[static_cast<std::size_t>(m++)] = 0;
      if (m == steps) break;
    }
  }
}

}  // namespace detail

/// Verifies D(sigma*, tau) <= D(sigma*, tau*) <= D(sigma, tau*) on the tree for
/// first-entry deviations: every monotone threshold region when `exhaustive`
/// (M <= 8), plus `n_random` random regions per player.
inline SaddleReport tree_saddle_check(const LatticeModel& model, const GameSpec& spec, std::size_t n_random,
                                      std::uint64_t seed, bool exhaustive = true,
                                      TieRule ties = TieRule::HolderFirst) {
  const int steps = model.steps();
  if (exhaustive && steps > 8) throw ValidationError("exhaustive saddle audit requires M <= 8");
  const TreeValues tree = tree_game_value(model, spec);
  const auto [cancel_star, exercise_star] = debut_regions(model, spec, tree.values);

  SaddleReport report;
  report.v0 = tree.v0;
  report.equilibrium = evaluate_stopping_regions(model, spec, cancel_star, exercise_star, ties);
  report.worst_holder_gain = -std::numeric_limits<double>::infinity();
  report.worst_writer_gain = -std::numeric_limits<double>::infinity();

  auto holder_deviation = [&](const NodeMask& tau) {
    const double d = evaluate_stopping_regions(model, spec, cancel_star, tau, ties);
    report.worst_holder_gain = std::max(report.worst_holder_gain, d - report.equilibrium);
    ++report.deviations;
  };
  auto writer_deviation = [&](const NodeMask& sigma) {
    const double d = evaluate_stopping_regions(model, spec, sigma, exercise_star, ties);
    report.worst_writer_gain = std::max(report.worst_writer_gain, report.equilibrium - d);
    ++report.deviations;
  };

  holder_deviation(exercise_star);
  writer_deviation(cancel_star);
  if (exhaustive) {
    detail::for_each_threshold_region(steps, holder_deviation);
    detail::for_each_threshold_region(steps, writer_deviation);
  }

  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto random_region = [&](const NodeMask& anchor, std::size_t index) {
    NodeMask mask(steps);
    // Alternate between independent random sets and perturbations of the optimal region.
    const bool perturb = index % 2 == 1;
    const double p = perturb ? 0.05 + 0.25 * unit(gen) : unit(gen);
    for (int m = 0; m < steps; ++m) {
      for (int j = 0; j <= m; ++j) {
        const bool flip = unit(gen) < p;
        mask(m, j) = perturb ? (anchor(m, j) != 0) != flip : flip;
      }
    }
    return mask;
  };
  for (std::size_t i = 0; i < n_random; ++i) holder_deviation(random_region(exercise_star, i));
  for (std::size_t i = 0; i < n_random; ++i) writer_deviation(random_region(cancel_star, i));

  report.passed = report.worst_holder_gain <= report.tolerance && report.worst_writer_gain <= report.tolerance &&
                  std::abs(report.equilibrium - report.v0) <= report.tolerance;
  return report;
}

}  // namespace dynkin
