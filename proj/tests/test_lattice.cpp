#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "dynkin/closedform.hpp"
#include "dynkin/commands.hpp"
#include "dynkin/lattice.hpp"

using namespace dynkin;

namespace {

MarketParams market(OptionKind kind, double spot, double penalty = 5.0) {
  return MarketParams{0.06, 0.4, spot, 100.0, penalty, kind};
}

struct Tree {
  MarketParams params;
  TimeGrid grid;
  LatticeModel model;
  GameSpec spec;

  Tree(OptionKind kind, double spot, double horizon, int steps, double penalty = 5.0)
      : params(market(kind, spot, penalty)), grid(horizon, steps), model(params, grid),
        spec(cancellable_option(params, grid)) {}
};

double black_scholes_put(double s, double k, double r, double vol, double t) {
  const double d1 = (std::log(s / k) + (r + 0.5 * vol * vol) * t) / (vol * std::sqrt(t));
  const double d2 = d1 - vol * std::sqrt(t);
  auto n = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  return k * std::exp(-r * t) * n(-d2) - s * n(-d1);
}

NodeMask random_mask(std::mt19937_64& gen, int steps, double density) {
  std::bernoulli_distribution flip(density);
  NodeMask mask(steps);
  for (int m = 0; m < steps; ++m)
    for (int j = 0; j <= m; ++j) mask(m, j) = flip(gen);
  return mask;
}

}  // namespace

TEST(Lattice, SingleStepMatchesHandFormula) {
  for (OptionKind kind : {OptionKind::Call, OptionKind::Put}) {
    for (double spot : {80.0, 98.0, 103.0, 120.0}) {
      const Tree s(kind, spot, 0.25, 1);
      const double u = std::exp(0.4 * 0.5), d = 1.0 / u;
      const double q = (std::exp(0.06 * 0.25) - d) / (u - d);
      const double cont = std::exp(-0.06 * 0.25) * (q * payoff(kind, spot * u, 100.0) + (1 - q) * payoff(kind, spot * d, 100.0));
      const double g = payoff(kind, spot, 100.0);
      EXPECT_NEAR(tree_game_value(s.model, s.spec).v0, std::min(g + 5.0, std::max(g, cont)), 1e-12);
    }
  }
}

TEST(Lattice, ModelParameters) {
  const Tree s(OptionKind::Put, 100.0, 1.0, 100);
  EXPECT_NEAR(s.model.up() * s.model.down(), 1.0, 1e-15);
  EXPECT_NEAR(s.model.price(2, 1), 100.0, 1e-12);
  EXPECT_NEAR(s.model.price(3, 3), 100.0 * std::pow(s.model.up(), 3), 1e-9);
  // Risk-neutral drift: discounted one-step expectation of the price is the price.
  EXPECT_NEAR(s.model.expect(5, 2, [&](int m, int j) { return s.model.price(m, j); }), s.model.price(5, 2), 1e-10);
  double total = 0.0;
  for (double p : s.model.level_probabilities(100)) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Lattice, RejectsArbitrageStep) {
  // Large rate against small volatility over a long step pushes q above 1.
  const MarketParams p{0.5, 0.05, 100.0, 100.0, 5.0, OptionKind::Put};
  EXPECT_THROW(LatticeModel(p, TimeGrid(10.0, 1)), ConfigError);
}

TEST(Lattice, AmericanTreeConvergesAboveEuropean) {
  const Tree s(OptionKind::Put, 100.0, 1.0, 1000);
  const double american = tree_american_value(s.model, american_option(s.params, s.grid)).v0;
  const double european = black_scholes_put(100.0, 100.0, 0.06, 0.4, 1.0);
  EXPECT_GT(american, european);
  EXPECT_LT(american - european, 1.0);
}

TEST(Lattice, LargePenaltyEqualsAmerican) {
  for (double spot : {60.0, 100.0, 140.0}) {
    const Tree s(OptionKind::Put, spot, 0.5, 256, 40.0);
    const TreeValues game = tree_game_value(s.model, s.spec);
    const TreeValues amer = tree_american_value(s.model, s.spec);
    for (int m = 0; m <= 256; ++m)
      for (int j = 0; j <= m; ++j) ASSERT_EQ(game.values(m, j), amer.values(m, j));
  }
}

TEST(Lattice, GameValueBounds) {
  const Tree call(OptionKind::Call, 140.0, 0.5, 256);
  const double v = tree_game_value(call.model, call.spec).v0;
  EXPECT_GE(v, 40.0);
  EXPECT_LE(v, 45.0);
  const Tree put(OptionKind::Put, 60.0, 0.5, 256);
  EXPECT_NEAR(tree_game_value(put.model, put.spec).v0, 40.0, 1e-12);
}

TEST(Lattice, GameValueBelowAmericanAndMonotoneInPenalty) {
  for (OptionKind kind : {OptionKind::Call, OptionKind::Put}) {
    for (double spot : {60.0, 90.0, 110.0, 140.0}) {
      double previous = -1.0;
      for (double penalty : {0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0}) {
        const Tree s(kind, spot, 1.0, 128, penalty);
        const double v = tree_game_value(s.model, s.spec).v0;
        EXPECT_LE(v, tree_american_value(s.model, s.spec).v0 + 1e-12);
        EXPECT_GE(v, previous - 1e-12);
        previous = v;
      }
    }
  }
}

TEST(Lattice, SwitchingIdentityAndMokobodski) {
  for (OptionKind kind : {OptionKind::Call, OptionKind::Put}) {
    for (double spot : {60.0, 100.0, 140.0}) {
      const Tree s(kind, spot, 0.5, 256);
      const TreeIdentityScan scan = scan_tree_identities(s.model, s.spec);
      EXPECT_LE(scan.max_identity_error, 1e-12);
      EXPECT_LE(scan.max_sandwich_violation, 0.0);
      EXPECT_EQ(scan.simultaneous_switch_nodes, 0u);
    }
  }
}

TEST(Lattice, SwitchingTerminalValues) {
  const Tree s(OptionKind::Call, 100.0, 0.5, 16);
  const TreeSwitching sw = tree_switching_values(s.model, s.spec);
  for (int j = 0; j <= 16; ++j) {
    EXPECT_EQ(sw.y0(16, j), 0.0);
    EXPECT_EQ(sw.y1(16, j), payoff(OptionKind::Call, s.model.price(16, j), 100.0));
  }
}

TEST(Lattice, EmptyControlsCollectTerminalReward) {
  const Tree s(OptionKind::Put, 100.0, 0.5, 32);
  SwitchingSchedule stay0{{{0, 0}}};
  SwitchingSchedule stay1{{{0, 1}}};
  EXPECT_EQ(evaluate_switching_control(s.model, s.spec, stay0, 0), 0.0);
  const TreeValues european = [&] {
    GameSpec e = american_option(s.params, s.grid);
    e.lower = [](int, double) { return -1e300; };
    return tree_american_value(s.model, e);
  }();
  EXPECT_NEAR(evaluate_switching_control(s.model, s.spec, stay1, 1), european.v0, 1e-12);
  EXPECT_NEAR(evaluate_switching_control(s.model, s.spec, SwitchingPolicy(32), 1), european.v0, 1e-12);
}

TEST(Lattice, SingleSwitchScheduleCost) {
  const Tree s(OptionKind::Put, 100.0, 0.5, 8);
  // Switch 0 -> 1 at date 0 pays U(0) = 5 and then holds the European payoff.
  SwitchingSchedule sched{{{0, 0}, {0, 1}}};
  SwitchingSchedule stay1{{{0, 1}}};
  EXPECT_NEAR(evaluate_switching_control(s.model, s.spec, sched, 0),
              evaluate_switching_control(s.model, s.spec, stay1, 1) - 5.0, 1e-12);
}

TEST(Lattice, DebutPolicyAttainsSwitchingValue) {
  for (OptionKind kind : {OptionKind::Call, OptionKind::Put}) {
    for (double spot : {70.0, 100.0, 130.0}) {
      const Tree s(kind, spot, 1.0, 64);
      const TreeSwitching sw = tree_switching_values(s.model, s.spec);
      const SwitchingPolicy best = debut_policy(sw);
      EXPECT_NEAR(evaluate_switching_control(s.model, s.spec, best, 0), sw.y0(0, 0), 1e-10);
      EXPECT_NEAR(evaluate_switching_control(s.model, s.spec, best, 1), sw.y1(0, 0), 1e-10);
    }
  }
}

TEST(Lattice, NoPolicyBeatsSwitchingValue) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const OptionKind kind = trial % 2 ? OptionKind::Call : OptionKind::Put;
    const Tree s(kind, 60.0 + 80.0 * unit(gen), 0.25 + 2.0 * unit(gen), 12, 1.0 + 10.0 * unit(gen));
    const TreeSwitching sw = tree_switching_values(s.model, s.spec);
    SwitchingPolicy policy(12);
    policy.switch_from[0] = random_mask(gen, 12, unit(gen));
    policy.switch_from[1] = random_mask(gen, 12, unit(gen));
    for (int i = 0; i < 2; ++i) {
      const double best = i == 0 ? sw.y0(0, 0) : sw.y1(0, 0);
      EXPECT_LE(evaluate_switching_control(s.model, s.spec, policy, i), best + 1e-12);
    }
  }
}

TEST(Lattice, NoScheduleBeatsSwitchingValue) {
  // Every open-loop schedule with at most three switches on a four-step tree.
  const Tree s(OptionKind::Put, 95.0, 0.5, 4);
  const TreeSwitching sw = tree_switching_values(s.model, s.spec);
  for (int initial = 0; initial < 2; ++initial) {
    const double best = initial == 0 ? sw.y0(0, 0) : sw.y1(0, 0);
    int count = 0;
    for (int a = 0; a < 4; ++a) {
      for (int b = a; b < 4; ++b) {
        for (int c = b; c < 4; ++c) {
          for (int n = 0; n <= 3; ++n) {
            SwitchingSchedule sched{{{0, initial}}};
            const int dates[3] = {a, b, c};
            for (int k = 0; k < n; ++k) sched.entries.push_back({dates[k], k % 2 == 0 ? 1 - initial : initial});
            EXPECT_LE(evaluate_switching_control(s.model, s.spec, sched, initial), best + 1e-12);
            ++count;
          }
        }
      }
    }
    EXPECT_EQ(count, 80);
  }
}

TEST(Lattice, ScheduleValidation) {
  EXPECT_THROW(validate_schedule(SwitchingSchedule{}, 4, 0), ValidationError);
  EXPECT_THROW(validate_schedule(SwitchingSchedule{{{1, 0}}}, 4, 0), ValidationError);
  EXPECT_THROW(validate_schedule(SwitchingSchedule{{{0, 1}}}, 4, 0), ValidationError);
  EXPECT_THROW(validate_schedule(SwitchingSchedule{{{0, 0}, {2, 1}, {1, 0}}}, 4, 0), ValidationError);
  EXPECT_THROW(validate_schedule(SwitchingSchedule{{{0, 0}, {1, 1}, {2, 1}}}, 4, 0), ValidationError);
  EXPECT_THROW(validate_schedule(SwitchingSchedule{{{0, 0}, {5, 1}}}, 4, 0), ValidationError);
  EXPECT_THROW(validate_schedule(SwitchingSchedule{{{0, 0}, {4, 1}}}, 4, 0), ValidationError);
  EXPECT_THROW(validate_schedule(SwitchingSchedule{{{0, 2}}}, 4, 2), ValidationError);
  EXPECT_NO_THROW(validate_schedule(SwitchingSchedule{{{0, 0}, {1, 1}, {1, 0}}}, 4, 0));
}

TEST(Lattice, ThresholdRegionEnumerationCount) {
  // Each date m < M has m + 2 thresholds, two orientations.
  std::size_t count = 0;
  detail::for_each_threshold_region(4, [&](const NodeMask&) { ++count; });
  EXPECT_EQ(count, 2u * 2 * 3 * 4 * 5);
}

TEST(Lattice, EquilibriumRegionsReproduceValue) {
  for (OptionKind kind : {OptionKind::Call, OptionKind::Put}) {
    for (double spot : {60.0, 100.0, 140.0}) {
      const Tree s(kind, spot, 0.5, 128);
      const TreeValues tree = tree_game_value(s.model, s.spec);
      const auto [cancel, exercise] = debut_regions(s.model, s.spec, tree.values);
      EXPECT_NEAR(evaluate_stopping_regions(s.model, s.spec, cancel, exercise), tree.v0, 1e-10);
    }
  }
}

TEST(Lattice, SaddleAuditExhaustive) {
  for (OptionKind kind : {OptionKind::Call, OptionKind::Put}) {
    for (double spot : {60.0, 100.0, 140.0}) {
      for (TieRule ties : {TieRule::HolderFirst, TieRule::CancellerFirst}) {
        const Tree s(kind, spot, 0.5, 8);
        const SaddleReport r = tree_saddle_check(s.model, s.spec, 200, 5, true, ties);
        EXPECT_TRUE(r.passed) << to_string(kind) << " " << spot << " margin " << r.worst_margin();
        EXPECT_LE(r.worst_margin(), 1e-10);
        EXPECT_NEAR(r.equilibrium, r.v0, 1e-10);
      }
    }
  }
}

TEST(Lattice, SaddleAuditRandomOnLongHorizon) {
  const Tree s(OptionKind::Put, 110.0, 4.0, 40);
  const SaddleReport r = tree_saddle_check(s.model, s.spec, 500, 9, false);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.deviations, 1002u);
  EXPECT_THROW(tree_saddle_check(s.model, s.spec, 1, 1, true), ValidationError);
}

TEST(Lattice, RefinementDifferencesShrink) {
  for (auto [kind, spot] : {std::pair{OptionKind::Call, 60.0}, std::pair{OptionKind::Put, 140.0}}) {
    auto value = [&](int steps) {
      const Tree s(kind, spot, 0.5, steps);
      return tree_game_value(s.model, s.spec).v0;
    };
    const double coarse = std::abs(value(64) - value(32));
    const double fine = std::abs(value(1024) - value(512));
    EXPECT_LT(fine, coarse);
    EXPECT_LT(fine, 0.02);
  }
}

TEST(Lattice, LongHorizonApproachesPerpetual) {
  const Tree call(OptionKind::Call, 140.0, 32.0, 2000);
  EXPECT_NEAR(tree_game_value(call.model, call.spec).v0, perpetual_cancellable(call.params), 0.05 * 45.0);
  const Tree put(OptionKind::Put, 140.0, 32.0, 2000);
  EXPECT_NEAR(tree_game_value(put.model, put.spec).v0, perpetual_cancellable(put.params), 0.1 * 3.885);
}
