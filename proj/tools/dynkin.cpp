// Command-line front end: price, sweep, tree, perpetual, verify.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "dynkin/commands.hpp"

namespace {

constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfig = 2;

struct Flags {
  std::map<std::string, std::string> settings;
  std::string config_file;
  std::string out;
  bool american = false;
};

// Flag name == config key.
const char* const kSettingFlags[][2] = {
    {"kind", "Option kind: call or put"},
    {"s0", "Initial asset price"},
    {"strike", "Strike K"},
    {"rate", "Risk-free rate r"},
    {"vol", "Volatility"},
    {"penalty", "Cancellation penalty delta"},
    {"horizon", "Horizon T in years"},
    {"steps", "Time steps M"},
    {"paths", "Simulated paths per run"},
    {"runs", "Independent runs averaged"},
    {"seed", "Master seed (falls back to DYNKIN_SEED)"},
    {"threads", "Worker threads"},
    {"degree", "Regression polynomial degree"},
    {"q-max", "Sweep horizons T = 0.5*2^q for q = 0..q-max"},
    {"antithetic", "Antithetic sampling (true/false)"},
    {"scheme", "LSMC continuation: cashflow (default) or fitted"},
};

void add_common(CLI::App* cmd, Flags& flags) {
  for (const auto& [name, help] : kSettingFlags) {
    cmd->add_option(std::string("--") + name, flags.settings[name], help);
  }
  cmd->add_option("--config", flags.config_file, "Flat key=value config file; flags override it");
  cmd->add_option("--out", flags.out, "Write CSV output to this file");
}

dynkin::RunConfig build_config(const CLI::App* cmd, const Flags& flags) {
  dynkin::RunConfig config;
  bool seed_given = false;
  if (!flags.config_file.empty()) seed_given = dynkin::load_config_file(config, flags.config_file);
  for (const auto& [name, help] : kSettingFlags) {
    if (cmd->count(std::string("--") + name) == 0) continue;
    dynkin::apply_setting(config, name, flags.settings.at(name));
    if (std::string(name) == "seed") seed_given = true;
  }
  if (!seed_given) {
    if (auto env = dynkin::seed_from_environment()) config.seed = *env;
  }
  if (flags.american) config.american = true;
  return config;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream file(out, std::ios::binary);
  if (!file) throw dynkin::ConfigError("cannot write '" + out + "'");
  file << text;
}

int run_price(const dynkin::RunConfig& config, const std::string& out) {
  const auto report = dynkin::cmd_price(config);
  std::cout << (config.american ? "american " : "cancellable ") << dynkin::to_string(config.market.kind)
            << " value=" << dynkin::format_g10(report.mean) << " std_error=" << dynkin::format_g10(report.std_error)
            << " run_std_dev=" << dynkin::format_g10(report.run_std_dev) << " runs=" << config.n_runs << "\n";
  if (!out.empty()) {
    std::string csv = "run,value,std_error\n";
    for (std::size_t i = 0; i < report.run_values.size(); ++i) {
      csv += std::to_string(i) + "," + dynkin::format_g10(report.run_values[i]) + "," +
             dynkin::format_g10(report.run_errors[i]) + "\n";
    }
    emit(csv, out);
  }
  return 0;
}

int run_tree(const dynkin::RunConfig& config) {
  const auto r = dynkin::cmd_tree(config);
  std::cout << "game_value=" << dynkin::format_g10(r.game_value) << "\n"
            << "american_value=" << dynkin::format_g10(r.american_value) << "\n"
            << "y0=" << dynkin::format_g10(r.y0) << " y1=" << dynkin::format_g10(r.y1)
            << " y1-y0=" << dynkin::format_g10(r.y1 - r.y0) << "\n"
            << "perpetual=" << dynkin::format_g10(r.perpetual) << "\n";
  return 0;
}

int run_perpetual(const dynkin::RunConfig& config) {
  config.validate();
  const auto& m = config.market;
  const auto perp = dynkin::perpetual_params(m);
  std::cout << "value=" << dynkin::format_g10(dynkin::perpetual_cancellable(m)) << "\n"
            << "gamma=" << dynkin::format_g10(perp.gamma_exp) << "\n"
            << "delta_star=" << dynkin::format_g10(perp.delta_star) << "\n";
  if (perp.k_star) std::cout << "k_star=" << dynkin::format_g10(*perp.k_star) << "\n";
  std::cout << "american_put=" << dynkin::format_g10(dynkin::perpetual_american_put(m, m.spot)) << "\n";
  return 0;
}

int run_verify(const dynkin::RunConfig& config) {
  const auto report = dynkin::cmd_verify(config);
  for (const auto& c : report.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " margin=" << dynkin::format_g10(c.margin)
              << " tolerance=" << dynkin::format_g10(c.tolerance);
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << "\n";
  }
  std::cout << (report.passed() ? "all checks passed\n" : "verification FAILED\n");
  return report.passed() ? 0 : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-horizon Dynkin games (cancellable options) by two-mode optimal switching"};
  app.require_subcommand(1);

  Flags flags;
  auto* price = app.add_subcommand("price", "LSMC game value averaged over independent runs");
  auto* sweep = app.add_subcommand("sweep", "CSV of values over horizons T = 0.5*2^q");
  auto* tree = app.add_subcommand("tree", "Binomial-lattice game, American and switching values");
  auto* perpetual = app.add_subcommand("perpetual", "Closed-form perpetual values");
  auto* verify = app.add_subcommand("verify", "Run the invariant suite");
  for (auto* cmd : {price, sweep, tree, perpetual, verify}) add_common(cmd, flags);
  price->add_flag("--american", flags.american, "Price the American option (no cancellation)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    const dynkin::RunConfig config = build_config(cmd, flags);
    if (cmd == price) return run_price(config, flags.out);
    if (cmd == sweep) {
      emit(dynkin::sweep_csv(dynkin::cmd_sweep(config)), flags.out);
      return 0;
    }
    if (cmd == tree) return run_tree(config);
    if (cmd == perpetual) return run_perpetual(config);
    return run_verify(config);
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  }
}
