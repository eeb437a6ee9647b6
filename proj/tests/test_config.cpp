#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "dynkin/commands.hpp"
#include "dynkin/config.hpp"

using namespace dynkin;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  const RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.n_paths, 10000u);
  EXPECT_EQ(c.n_runs, 100u);
  EXPECT_EQ(c.steps, 1000);
  EXPECT_EQ(c.basis_degree, 2);
  EXPECT_TRUE(c.antithetic);
}

TEST(Config, ApplySettings) {
  RunConfig c;
  apply_setting(c, "kind", "put");
  apply_setting(c, "s0", "60");
  apply_setting(c, "penalty", "7.5");
  apply_setting(c, "paths", "400");
  apply_setting(c, "antithetic", "false");
  apply_setting(c, "scheme", "fitted");
  apply_setting(c, "q-max", "3");
  EXPECT_EQ(c.market.kind, OptionKind::Put);
  EXPECT_EQ(c.market.spot, 60.0);
  EXPECT_EQ(c.market.penalty, 7.5);
  EXPECT_EQ(c.n_paths, 400u);
  EXPECT_FALSE(c.antithetic);
  EXPECT_EQ(c.scheme, ContinuationScheme::FittedValue);
  EXPECT_EQ(c.sweep_q_max, 3);
}

TEST(Config, RejectsMalformedValues) {
  RunConfig c;
  EXPECT_THROW(apply_setting(c, "kind", "straddle"), ConfigError);
  EXPECT_THROW(apply_setting(c, "s0", "abc"), ConfigError);
  EXPECT_THROW(apply_setting(c, "steps", "10.5"), ConfigError);
  EXPECT_THROW(apply_setting(c, "antithetic", "maybe"), ConfigError);
  EXPECT_THROW(apply_setting(c, "colour", "blue"), ConfigError);
  EXPECT_THROW(apply_setting(c, "scheme", "other"), ConfigError);
}

TEST(Config, ValidationMapsToConfigError) {
  RunConfig c;
  c.market.penalty = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.horizon = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.n_paths = 101;
  EXPECT_THROW(c.validate(), ConfigError);
  c.antithetic = false;
  EXPECT_NO_THROW(c.validate());
  c.n_runs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.threads = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, LoadsFileWithComments) {
  const auto path = write_temp("dynkin_config_test.cfg",
                               "# experiment\n"
                               "kind = put\n"
                               "\n"
                               "s0=90   # spot\n"
                               "runs = 3\n");
  RunConfig c;
  EXPECT_FALSE(load_config_file(c, path.string()));
  EXPECT_EQ(c.market.kind, OptionKind::Put);
  EXPECT_EQ(c.market.spot, 90.0);
  EXPECT_EQ(c.n_runs, 3u);

  const auto seeded = write_temp("dynkin_config_seed.cfg", "seed = 12\n");
  EXPECT_TRUE(load_config_file(c, seeded.string()));
  EXPECT_EQ(c.seed, 12u);
}

TEST(Config, FileErrors) {
  RunConfig c;
  EXPECT_THROW(load_config_file(c, "/nonexistent/dynkin.cfg"), ConfigError);
  const auto path = write_temp("dynkin_config_bad.cfg", "kind put\n");
  EXPECT_THROW(load_config_file(c, path.string()), ConfigError);
}

TEST(Config, SeedFromEnvironment) {
  ::setenv("DYNKIN_SEED", "321", 1);
  EXPECT_EQ(seed_from_environment(), 321u);
  ::setenv("DYNKIN_SEED", "x", 1);
  EXPECT_THROW(seed_from_environment(), ConfigError);
  ::unsetenv("DYNKIN_SEED");
  EXPECT_FALSE(seed_from_environment().has_value());
}

TEST(Commands, PriceIsIndependentOfThreads) {
  RunConfig c;
  c.market.kind = OptionKind::Put;
  c.market.spot = 120.0;
  c.steps = 16;
  c.n_paths = 500;
  c.n_runs = 6;
  c.threads = 1;
  const SolveReport one = cmd_price(c);
  c.threads = 4;
  const SolveReport many = cmd_price(c);
  EXPECT_EQ(one.run_values, many.run_values);
  EXPECT_EQ(one.mean, many.mean);
  EXPECT_GT(one.std_error, 0.0);
}

TEST(Commands, SingleRunSingleStepMatchesFormula) {
  RunConfig c;
  c.market.kind = OptionKind::Put;
  c.market.spot = 97.0;
  c.horizon = 0.01;
  c.steps = 1;
  c.n_paths = 1000;
  c.n_runs = 1;
  const SolveReport r = cmd_price(c);
  const PathSet paths = simulate_paths(c.market, c.grid(), c.n_paths, derive_seed(c.seed, 0), true);
  double mean = 0.0;
  for (std::size_t p = 0; p < paths.n_paths(); ++p) mean += payoff(OptionKind::Put, paths.at(p, 1), 100.0);
  mean *= std::exp(-0.06 * 0.01) / static_cast<double>(paths.n_paths());
  EXPECT_NEAR(r.mean, std::min(8.0, std::max(3.0, mean)), 1e-12);
}

TEST(Commands, SweepCsvFormat) {
  const std::vector<SweepRow> rows = {{0.5, 1.0 / 3.0, 0.0125, 45.0}, {1.0, 40.5, 1e-12, 45.0}};
  EXPECT_EQ(sweep_csv(rows), "T,value,std_error,perpetual\n0.5,0.3333333333,0.0125,45\n1,40.5,1e-12,45\n");
}

TEST(Commands, VerifyPassesOnSmallConfig) {
  RunConfig c;
  c.steps = 32;
  c.n_paths = 1000;
  const VerifyReport r = cmd_verify(c);
  for (const auto& check : r.checks) EXPECT_TRUE(check.passed) << check.name << " margin " << check.margin;
  EXPECT_TRUE(r.passed());
}
