#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "dynkin/error.hpp"
#include "dynkin/parallel.hpp"

namespace dynkin {

enum class OptionKind { Call, Put };

inline const char* to_string(OptionKind kind) { return kind == OptionKind::Call ? "call" : "put"; }

/// Black-Scholes market together with the terms of a cancellable (game) option.
struct MarketParams {
  double rate = 0.06;        // risk-free rate, 1/year
  double volatility = 0.4;   // 1/sqrt(year)
  double spot = 100.0;       // S0
  double strike = 100.0;     // K
  double penalty = 5.0;      // cancellation penalty delta paid on top of the payoff
  OptionKind kind = OptionKind::Call;

  /// Simulation admits zero volatility; pricing entry points pass require_positive_vol.
  void validate(bool require_positive_vol = true) const {
    if (!(rate > 0.0)) throw ValidationError("rate must be > 0");
    if (!(spot > 0.0)) throw ValidationError("spot must be > 0");
    if (!(strike > 0.0)) throw ValidationError("strike must be > 0");
    if (!(penalty > 0.0))
      throw ValidationError("penalty must be > 0 (strict gap between cancellation and exercise values)");
    if (require_positive_vol ? !(volatility > 0.0) : !(volatility >= 0.0))
      throw ValidationError(require_positive_vol ? "volatility must be > 0" : "volatility must be >= 0");
  }
};

/// Uniform time grid t_m = m * T / M on [0, T].
class TimeGrid {
 public:
  TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ValidationError("horizon must be finite and > 0");
    if (steps < 1) throw ValidationError("steps must be >= 1");
  }

  double horizon() const { return horizon_; }
  int steps() const { return steps_; }
  double step() const { return horizon_ / steps_; }
  /// t_M is returned as exactly T.
  double time(int m) const { return m == steps_ ? horizon_ : m * step(); }

 private:
  double horizon_;
  int steps_;
};

inline double payoff(OptionKind kind, double s, double strike) {
  return kind == OptionKind::Call ? std::max(s - strike, 0.0) : std::max(strike - s, 0.0);
}

/// SplitMix64 finaliser; used to derive independent sub-seeds from a master seed.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

/// Generator for stream `stream` under `seed`; the stream depends only on the pair.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

/// Standard normal draw by inverse-CDF transform of an open-interval uniform.
inline double standard_normal(std::mt19937_64& gen) {
  const double u = (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53;
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

/// Simulated asset prices, N paths by M+1 dates, stored row-major by path.
class PathSet {
 public:
  PathSet(std::size_t n_paths, int steps, std::uint64_t seed, bool antithetic)
      : n_paths_(n_paths), steps_(steps), seed_(seed), antithetic_(antithetic),
        prices_(n_paths * static_cast<std::size_t>(steps + 1)) {}

  std::size_t n_paths() const { return n_paths_; }
  int steps() const { return steps_; }
  std::uint64_t seed() const { return seed_; }
  bool antithetic() const { return antithetic_; }

  double at(std::size_t path, int m) const { return prices_[index(path, m)]; }
  std::span<const double> path(std::size_t n) const {
    return {prices_.data() + index(n, 0), static_cast<std::size_t>(steps_ + 1)};
  }
  std::span<double> path(std::size_t n) {
    return {prices_.data() + index(n, 0), static_cast<std::size_t>(steps_ + 1)};
  }

  /// Cross-section S_m over all paths.
  std::vector<double> slice(int m) const {
    std::vector<double> out(n_paths_);
    for (std::size_t n = 0; n < n_paths_; ++n) out[n] = at(n, m);
    return out;
  }

  std::span<const double> raw() const { return prices_; }

 private:
  std::size_t index(std::size_t path, int m) const {
    return path * static_cast<std::size_t>(steps_ + 1) + static_cast<std::size_t>(m);
  }

  std::size_t n_paths_;
  int steps_;
  std::uint64_t seed_;
  bool antithetic_;
  std::vector<double> prices_;
};

/// Exact log-Euler GBM paths: S_{m+1} = S_m exp((r - rho^2/2) h + rho sqrt(h) xi).
/// Path n draws from stream n (antithetic: pair k = n/2 shares stream k, the odd
/// member negating every draw), so the output does not depend on `threads`.
inline PathSet simulate_paths(const MarketParams& params, const TimeGrid& grid, std::size_t n_paths,
                              std::uint64_t seed, bool antithetic, unsigned threads = 1) {
  params.validate(/*require_positive_vol=*/false);
  if (n_paths < 2) throw ValidationError("n_paths must be >= 2");
  if (antithetic && n_paths % 2 != 0) throw ValidationError("antithetic sampling needs an even n_paths");

  PathSet paths(n_paths, grid.steps(), seed, antithetic);
  const double h = grid.step();
  const double drift = (params.rate - 0.5 * params.volatility * params.volatility) * h;
  const double diffusion = params.volatility * std::sqrt(h);
  const int steps = grid.steps();

  auto fill = [&](std::span<double> row, std::mt19937_64& gen, double sign) {
    row[0] = params.spot;
    for (int m = 0; m < steps; ++m) {
      const double xi = sign * standard_normal(gen);
      row[m + 1] = row[m] * std::exp(drift + diffusion * xi);
    }
  };

  const std::size_t streams = antithetic ? n_paths / 2 : n_paths;
  parallel_for(streams, threads, [&](std::size_t k) {
    if (antithetic) {
      auto gen = make_stream(seed, k);
      fill(paths.path(2 * k), gen, 1.0);
      gen = make_stream(seed, k);
      fill(paths.path(2 * k + 1), gen, -1.0);
    } else {
      auto gen = make_stream(seed, k);
      fill(paths.path(k), gen, 1.0);
    }
  });
  return paths;
}

}  // namespace dynkin
