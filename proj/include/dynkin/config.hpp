#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "dynkin/error.hpp"
#include "dynkin/lsmc.hpp"
#include "dynkin/sim.hpp"

namespace dynkin {

inline constexpr std::uint64_t kDefaultSeed = 20140613;

/// Everything a pricing run needs. Defaults: r = 0.06, vol = 0.4, K = 100, penalty 5, call at S0 = 140, T = 0.5.
struct RunConfig {
  MarketParams market{0.06, 0.4, 140.0, 100.0, 5.0, OptionKind::Call};
  double horizon = 0.5;
  int steps = 1000;
  std::size_t n_paths = 10000;
  std::size_t n_runs = 100;
  int basis_degree = 2;
  std::uint64_t seed = kDefaultSeed;
  bool antithetic = true;
  int sweep_q_max = 8;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  bool american = false;
  ContinuationScheme scheme = ContinuationScheme::RealizedCashflow;

  TimeGrid grid() const { return TimeGrid(horizon, steps); }

  void validate() const {
    try {
      market.validate();
      (void)grid();
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
    if (n_runs < 1) throw ConfigError("runs must be >= 1");
    if (n_paths < 2) throw ConfigError("paths must be >= 2");
    if (antithetic && n_paths % 2 != 0) throw ConfigError("paths must be even with antithetic sampling");
    if (n_paths < static_cast<std::size_t>(basis_degree) + 1) throw ConfigError("paths must exceed the basis degree");
    if (basis_degree < 0) throw ConfigError("degree must be >= 0");
    if (sweep_q_max < 0) throw ConfigError("q-max must be >= 0");
    if (threads < 1) throw ConfigError("threads must be >= 1");
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("invalid value '" + std::string(text) + "' for " + std::string(key));
  return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("invalid boolean '" + std::string(text) + "' for " + std::string(key));
}

}  // namespace detail

inline ContinuationScheme parse_scheme(std::string_view text) {
  if (text == "cashflow") return ContinuationScheme::RealizedCashflow;
  if (text == "fitted") return ContinuationScheme::FittedValue;
  throw ConfigError("scheme must be 'cashflow' or 'fitted', got '" + std::string(text) + "'");
}

inline OptionKind parse_kind(std::string_view text) {
  if (text == "call") return OptionKind::Call;
  if (text == "put") return OptionKind::Put;
  throw ConfigError("kind must be 'call' or 'put', got '" + std::string(text) + "'");
}

/// Applies one key=value setting. Keys use the long flag names without dashes.
inline void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  using detail::parse_number;
  if (key == "kind") config.market.kind = parse_kind(value);
  else if (key == "s0") config.market.spot = parse_number<double>(key, value);
  else if (key == "strike") config.market.strike = parse_number<double>(key, value);
  else if (key == "rate") config.market.rate = parse_number<double>(key, value);
  else if (key == "vol") config.market.volatility = parse_number<double>(key, value);
  else if (key == "penalty") config.market.penalty = parse_number<double>(key, value);
  else if (key == "horizon") config.horizon = parse_number<double>(key, value);
  else if (key == "steps") config.steps = parse_number<int>(key, value);
  else if (key == "paths") config.n_paths = parse_number<std::size_t>(key, value);
  else if (key == "runs") config.n_runs = parse_number<std::size_t>(key, value);
  else if (key == "degree") config.basis_degree = parse_number<int>(key, value);
  else if (key == "seed") config.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "threads") config.threads = parse_number<unsigned>(key, value);
  else if (key == "q-max") config.sweep_q_max = parse_number<int>(key, value);
  else if (key == "antithetic") config.antithetic = detail::parse_bool(key, value);
  else if (key == "scheme") config.scheme = parse_scheme(value);
  else if (key == "american") config.american = detail::parse_bool(key, value);
  else throw ConfigError("unknown setting '" + std::string(key) + "'");
}

/// Reads a flat key=value file; blank lines and '#' comments are ignored.
/// Returns whether the file set the seed.
inline bool load_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  bool seed_set = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = detail::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    const auto key = detail::trim(view.substr(0, eq));
    apply_setting(config, key, detail::trim(view.substr(eq + 1)));
    seed_set = seed_set || key == "seed";
  }
  return seed_set;
}

/// DYNKIN_SEED, when set and numeric.
inline std::optional<std::uint64_t> seed_from_environment() {
  const char* text = std::getenv("DYNKIN_SEED");
  if (text == nullptr || *text == '\0') return std::nullopt;
  return detail::parse_number<std::uint64_t>("DYNKIN_SEED", text);
}

}  // namespace dynkin
