#ifndef NLSQ_CONFIG_HPP
#define NLSQ_CONFIG_HPP

// Experiment configuration: a flat key = value file with dotted section
// prefixes. '#' starts a comment. Unknown keys are rejected.
//
//   state.kind = cubic_phase        vacuum | coherent | thermal | cubic_phase | displaced
//   state.gamma = 0.1
//   state.beta_re / state.beta_im   coherent amplitude
//   state.n_bar                     thermal occupation
//   state.alpha_re / state.alpha_im displacement, with state.inner = <kind>
//   state.dimension = 128
//
//   channel.G = 0.1                 all rates and times in units of kappa
//   channel.kappa = 1
//   channel.n_bar = 1e4
//   channel.Gamma_m = 1e-9
//   channel.tau = 1000
//
//   sweep.axis = thermalisation_rate | interaction_time | cooperativity
//   sweep.values = 1e-7, 1e-5, 1e-3
//
//   ensemble.R = 20
//   ensemble.count = 1000000        samples per phase per reconstruction
//   ensemble.base_seed = 1
//
//   lambda.min = -0.2
//   lambda.max = 0.4
//   lambda.points = 101
//
//   certify.lambda_star             defaults to gamma for cubic states
//   certify.gamma_G
//   certify.k_sigma = 3
//
//   output.dir = out
//   output.name = run
//   mode = full | quick

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nlsq/errors.hpp"
#include "nlsq/estimate.hpp"
#include "nlsq/readout.hpp"
#include "nlsq/states.hpp"

namespace nlsq {

enum class SweepAxis { thermalisation_rate, interaction_time, cooperativity };
enum class RunMode { full, quick };

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::thermalisation_rate: return "thermalisation_rate";
    case SweepAxis::interaction_time: return "interaction_time";
    case SweepAxis::cooperativity: return "cooperativity";
  }
  return "?";
}

inline std::string_view to_string(RunMode m) { return m == RunMode::quick ? "quick" : "full"; }

inline SweepAxis parse_sweep_axis(std::string_view s) {
  for (auto a : {SweepAxis::thermalisation_rate, SweepAxis::interaction_time, SweepAxis::cooperativity}) {
    if (s == to_string(a)) return a;
  }
  throw ConfigError("invalid sweep axis '" + std::string(s) + "'");
}

inline RunMode parse_run_mode(std::string_view s) {
  if (s == "full") return RunMode::full;
  if (s == "quick") return RunMode::quick;
  throw ConfigError("mode must be full or quick, got '" + std::string(s) + "'");
}

inline constexpr std::size_t kQuickCountCap = 100'000;
inline constexpr std::size_t kQuickReplicateCap = 5;

struct ExperimentConfig {
  StateSpec state = cubic_spec(0.1);
  ChannelParams channel{.G = 0.1, .kappa = 1.0, .Gamma_m = 1e-9, .n_bar = 1e4, .tau = 1000.0, .phi = 0.0};
  std::optional<SweepAxis> axis;
  std::vector<double> sweep_values;
  std::size_t replicates = 20;
  std::size_t count = 1'000'000;
  std::uint64_t base_seed = 1;
  double lambda_min = -0.2;
  double lambda_max = 0.4;
  std::size_t lambda_points = 101;
  std::optional<double> lambda_star;
  std::optional<double> gamma_G;
  double k_sigma = 3.0;
  std::string out_dir = ".";
  std::string name = "nlsq";
  RunMode mode = RunMode::full;

  std::size_t effective_count() const { return mode == RunMode::quick ? std::min(count, kQuickCountCap) : count; }
  std::size_t effective_replicates() const {
    return mode == RunMode::quick ? std::min(replicates, kQuickReplicateCap) : replicates;
  }

  std::vector<double> lambdas() const { return linspace(lambda_min, lambda_max, lambda_points); }

  /// Channel for one sweep point. The thermalisation axis varies Gamma_m at
  /// fixed n_bar; the cooperativity axis solves C = G^2 / (n_bar Gamma_m kappa) for G.
  ChannelParams channel_at(double value) const {
    ChannelParams p = channel;
    if (!axis) return p;
    switch (*axis) {
      case SweepAxis::thermalisation_rate:
        p.Gamma_m = value / p.n_bar;
        break;
      case SweepAxis::interaction_time:
        p.tau = value;
        break;
      case SweepAxis::cooperativity:
        p.G = std::sqrt(value * p.n_bar * p.Gamma_m * p.kappa);
        break;
    }
    return p;
  }

  void validate() const {
    state.validate();
    channel.validate();
    if (replicates < 2) throw ConfigError("ensemble.R must be >= 2");
    if (count < kMinSampleCount) throw ConfigError("ensemble.count must be >= " + std::to_string(kMinSampleCount));
    if (lambda_points < 1) throw ConfigError("lambda.points must be >= 1");
    if (!std::isfinite(lambda_min) || !std::isfinite(lambda_max) || lambda_max < lambda_min) {
      throw ConfigError("lambda range must be finite with min <= max");
    }
    if (!(k_sigma > 0.0) || !std::isfinite(k_sigma)) throw ConfigError("certify.k_sigma must be positive");
    if (gamma_G && !(*gamma_G > 0.0)) throw ConfigError("certify.gamma_G must be positive");
    if (lambda_star && !std::isfinite(*lambda_star)) throw ConfigError("certify.lambda_star must be finite");
    if (name.empty() || name.find('/') != std::string::npos) throw ConfigError("output.name must be a plain file stem");
    for (std::size_t i = 0; i < sweep_values.size(); ++i) {
      const double v = sweep_values[i];
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("sweep values must be positive");
      if (i > 0 && !(v > sweep_values[i - 1])) throw ConfigError("sweep values must be strictly increasing");
    }
    if (!sweep_values.empty() && !axis) throw ConfigError("sweep.values given without sweep.axis");
    if (axis == SweepAxis::thermalisation_rate && !(channel.n_bar > 0.0)) {
      throw ConfigError("thermalisation_rate sweep needs channel.n_bar > 0");
    }
    if (axis == SweepAxis::cooperativity && !(channel.n_bar * channel.Gamma_m > 0.0)) {
      throw ConfigError("cooperativity sweep needs channel.n_bar * channel.Gamma_m > 0");
    }
    for (double v : sweep_values) channel_at(v).validate();
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    throw ConfigError("'" + std::string(key) + "': expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

inline std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("'" + std::string(key) + "': expected a nonnegative integer, got '" + std::string(v) + "'");
  }
  return out;
}

/// Integer count that also accepts exponent notation such as 1e6.
inline std::size_t parse_count(std::string_view key, std::string_view v) {
  const double d = parse_double(key, v);
  if (d < 0.0 || d != std::floor(d) || d > 1e15) {
    throw ConfigError("'" + std::string(key) + "': expected a nonnegative integer, got '" + std::string(v) + "'");
  }
  return static_cast<std::size_t>(d);
}

inline std::vector<double> parse_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  while (!trim(v).empty()) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    if (item.empty()) throw ConfigError("'" + std::string(key) + "': empty list item");
    out.push_back(parse_double(key, item));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
    if (trim(v).empty()) throw ConfigError("'" + std::string(key) + "': trailing comma");
  }
  return out;
}

}  // namespace detail

/// Raw key/value pairs in file order; duplicate keys are an error.
inline std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(detail::trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!kv.emplace(key, std::string(detail::trim(line.substr(eq + 1)))).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::optional<double> beta_re, beta_im, alpha_re, alpha_im;
  for (const auto& [key, value] : parse_key_values(text)) {
    const auto num = [&] { return detail::parse_double(key, value); };
    if (key == "state.kind") c.state.kind = parse_state_kind(value);
    else if (key == "state.inner") c.state.inner = parse_state_kind(value);
    else if (key == "state.gamma") c.state.gamma = num();
    else if (key == "state.n_bar") c.state.n_bar = num();
    else if (key == "state.beta_re") beta_re = num();
    else if (key == "state.beta_im") beta_im = num();
    else if (key == "state.alpha_re") alpha_re = num();
    else if (key == "state.alpha_im") alpha_im = num();
    else if (key == "state.dimension") c.state.dimension = detail::parse_count(key, value);
    else if (key == "channel.G") c.channel.G = num();
    else if (key == "channel.kappa") c.channel.kappa = num();
    else if (key == "channel.n_bar") c.channel.n_bar = num();
    else if (key == "channel.Gamma_m") c.channel.Gamma_m = num();
    else if (key == "channel.tau") c.channel.tau = num();
    else if (key == "sweep.axis") c.axis = parse_sweep_axis(value);
    else if (key == "sweep.values") c.sweep_values = detail::parse_list(key, value);
    else if (key == "ensemble.R") c.replicates = detail::parse_count(key, value);
    else if (key == "ensemble.count") c.count = detail::parse_count(key, value);
    else if (key == "ensemble.base_seed") c.base_seed = detail::parse_u64(key, value);
    else if (key == "lambda.min") c.lambda_min = num();
    else if (key == "lambda.max") c.lambda_max = num();
    else if (key == "lambda.points") c.lambda_points = detail::parse_count(key, value);
    else if (key == "certify.lambda_star") c.lambda_star = num();
    else if (key == "certify.gamma_G") c.gamma_G = num();
    else if (key == "certify.k_sigma") c.k_sigma = num();
    else if (key == "output.dir") c.out_dir = value;
    else if (key == "output.name") c.name = value;
    else if (key == "mode") c.mode = parse_run_mode(value);
    else throw ConfigError("unknown key '" + key + "'");
  }
  c.state.beta = {beta_re.value_or(0.0), beta_im.value_or(0.0)};
  c.state.alpha = {alpha_re.value_or(0.0), alpha_im.value_or(0.0)};
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace nlsq

#endif
