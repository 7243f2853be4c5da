#ifndef NLSQ_RUNNER_HPP
#define NLSQ_RUNNER_HPP

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlsq/config.hpp"
#include "nlsq/errors.hpp"
#include "nlsq/estimate.hpp"
#include "nlsq/hilbert.hpp"
#include "nlsq/parallel.hpp"
#include "nlsq/readout.hpp"
#include "nlsq/squeezing.hpp"
#include "nlsq/states.hpp"

namespace nlsq {

using Json = nlohmann::ordered_json;

struct Timings {
  double setup_seconds = 0.0;
  double sampling_seconds = 0.0;
  double total_seconds = 0.0;
  unsigned threads = 1;
};

struct SweepPoint {
  double value = 0.0;
  EnsembleReport ensemble;
};

struct SweepReport {
  ExperimentConfig config;
  std::vector<double> lambdas;
  std::vector<double> threshold;
  std::vector<double> v_analytic;
  std::vector<SweepPoint> points;
  Timings timings;
};

/// Reference curve for the overlay column: the closed form
/// 1/2 (1 + 9 (gamma - lambda)^2) for cubic phase states, otherwise V from
/// the exact state moments.
inline std::vector<double> analytic_curve(const StateSpec& spec, const QuantumState& state,
                                          std::span<const double> lambdas) {
  std::vector<double> out;
  out.reserve(lambdas.size());
  if (spec.kind == StateKind::cubic_phase) {
    for (double l : lambdas) out.push_back(0.5 * (1.0 + 9.0 * (spec.gamma - l) * (spec.gamma - l)));
    return out;
  }
  const auto m = exact_moment_set(state);
  for (double l : lambdas) out.push_back(nls_variance(m, l));
  return out;
}

/// Runs one ensemble per (value, channel) pair. Reconstructions for every
/// point and replicate share one task pool; results are collected by index.
inline SweepReport run_points(const ExperimentConfig& cfg, const std::vector<double>& values,
                              const std::vector<ChannelParams>& channels, unsigned threads = 0) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  cfg.validate();
  const unsigned workers = threads == 0 ? default_threads() : threads;

  SweepReport report;
  report.config = cfg;
  report.lambdas = cfg.lambdas();
  for (double l : report.lambdas) report.threshold.push_back(classical_threshold(l));

  const auto basis = build_basis(cfg.state.dimension, PositionGrid::for_dimension(cfg.state.dimension));
  const auto state = make_state(cfg.state, basis);
  report.v_analytic = analytic_curve(cfg.state, state, report.lambdas);

  const std::size_t points = channels.size();
  std::vector<std::unique_ptr<Reconstructor>> recs(points);
  parallel_for(points, workers, [&](std::size_t i) {
    recs[i] = std::make_unique<Reconstructor>(state, basis, channels[i]);
  });
  const auto t1 = clock::now();

  const std::size_t R = cfg.effective_replicates();
  const std::size_t count = cfg.effective_count();
  std::vector<std::uint64_t> seeds(R);
  for (std::size_t r = 0; r < R; ++r) seeds[r] = derive_seed(cfg.base_seed, r);
  std::vector<Reconstruction> runs(points * R);
  parallel_for(points * R, workers, [&](std::size_t t) { runs[t] = recs[t / R]->run(count, seeds[t % R]); });
  const auto t2 = clock::now();

  for (std::size_t i = 0; i < points; ++i) {
    const std::span<const Reconstruction> slice(runs.data() + i * R, R);
    report.points.push_back({values[i], summarize_ensemble(*recs[i], slice, seeds, cfg.base_seed, count,
                                                           report.lambdas)});
  }
  const std::chrono::duration<double> setup = t1 - t0, sampling = t2 - t1, total = clock::now() - t0;
  report.timings = {setup.count(), sampling.count(), total.count(), workers};
  return report;
}

/// One ensemble per sweep value along the configured axis.
inline SweepReport run_sweep(const ExperimentConfig& cfg, unsigned threads = 0) {
  if (!cfg.axis) throw ConfigError("sweep requires sweep.axis");
  std::vector<ChannelParams> channels;
  for (double v : cfg.sweep_values) channels.push_back(cfg.channel_at(v));
  return run_points(cfg, cfg.sweep_values, channels, threads);
}

/// A single ensemble at the channel template, reported with sweep value 0.
inline SweepReport run_single(const ExperimentConfig& cfg, unsigned threads = 0) {
  return run_points(cfg, {0.0}, {cfg.channel}, threads);
}

// ---------------------------------------------------------------------------
// Certification

struct Certificate {
  double lambda_star = 0.0;
  double v_mean = 0.0;
  double v_std = 0.0;
  double threshold = 0.0;
  double margin = 0.0;
  double k_sigma = 3.0;
  bool nonclassical = false;
  std::size_t nonclassical_points = 0;
  std::size_t grid_points = 0;
  std::optional<double> gamma;
  std::optional<double> gamma_G;
  std::optional<bool> resource;
};

/// Margin threshold(lambda*) - mean V(lambda*) against k times the ensemble
/// spread of V(lambda*). Without a configured lambda*, cubic states use gamma
/// and other states the grid point with the largest margin.
inline Certificate certify(const ExperimentConfig& cfg, const SweepReport& report, double floor = 1e-9) {
  if (report.points.empty() || report.points.front().ensemble.replicates() < 2) {
    throw NumericalError(NumericalError::Kind::data, "certification needs a completed ensemble");
  }
  const EnsembleReport& e = report.points.front().ensemble;
  Certificate c;
  c.k_sigma = cfg.k_sigma;
  c.grid_points = e.lambdas.size();
  const auto nonclassical = [&](double margin, double sigma) { return margin > std::max(cfg.k_sigma * sigma, floor); };

  std::size_t best = 0;
  for (std::size_t i = 0; i < e.lambdas.size(); ++i) {
    const double m = classical_threshold(e.lambdas[i]) - e.v[i].mean;
    if (nonclassical(m, e.v[i].std)) ++c.nonclassical_points;
    if (m > classical_threshold(e.lambdas[best]) - e.v[best].mean) best = i;
  }
  if (cfg.lambda_star) c.lambda_star = *cfg.lambda_star;
  else if (cfg.state.kind == StateKind::cubic_phase) c.lambda_star = cfg.state.gamma;
  else if (!e.lambdas.empty()) c.lambda_star = e.lambdas[best];
  else throw ConfigError("certify needs certify.lambda_star or a nonempty lambda grid");

  std::vector<double> v;
  for (const auto& a : e.replicate_coefficients) v.push_back(a[0] + c.lambda_star * (a[1] + c.lambda_star * a[2]));
  const Stat s = summarize(v);
  c.v_mean = s.mean;
  c.v_std = s.std;
  c.threshold = classical_threshold(c.lambda_star);
  c.margin = c.threshold - c.v_mean;
  c.nonclassical = nonclassical(c.margin, c.v_std);

  if (cfg.state.kind == StateKind::cubic_phase && cfg.state.gamma != 0.0) c.gamma = std::abs(cfg.state.gamma);
  c.gamma_G = cfg.gamma_G;
  if (c.gamma && c.gamma_G) c.resource = resource_condition(*c.gamma, *c.gamma_G);
  return c;
}

// ---------------------------------------------------------------------------
// Output

/// Shortest-safe 17 significant digit rendering, locale independent.
inline std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  if (ec != std::errc()) throw NumericalError(NumericalError::Kind::internal, "number formatting failed");
  return std::string(buf, ptr);
}

inline constexpr std::string_view kCsvHeader = "sweep_value,lambda,v_mean,v_std,v_lo,v_hi,v_analytic,threshold";

inline void emit_plot_data(const SweepReport& report, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& p : report.points) {
    for (std::size_t i = 0; i < report.lambdas.size(); ++i) {
      const Stat& v = p.ensemble.v[i];
      out << format_number(p.value) << ',' << format_number(report.lambdas[i]) << ',' << format_number(v.mean) << ','
          << format_number(v.std) << ',' << format_number(v.mean - v.std) << ',' << format_number(v.mean + v.std)
          << ',' << format_number(report.v_analytic[i]) << ',' << format_number(report.threshold[i]) << '\n';
    }
  }
}

inline std::string plot_data(const SweepReport& report) {
  std::ostringstream ss;
  emit_plot_data(report, ss);
  return ss.str();
}

inline Json to_json(const StateSpec& s) {
  Json j;
  j["kind"] = to_string(s.kind);
  j["dimension"] = s.dimension;
  const StateKind base = s.kind == StateKind::displaced ? s.inner : s.kind;
  if (s.kind == StateKind::displaced) {
    j["inner"] = to_string(s.inner);
    j["alpha"] = {s.alpha.real(), s.alpha.imag()};
  }
  if (base == StateKind::cubic_phase) j["gamma"] = s.gamma;
  if (base == StateKind::coherent) j["beta"] = {s.beta.real(), s.beta.imag()};
  if (base == StateKind::thermal) j["n_bar"] = s.n_bar;
  return j;
}

inline Json to_json(const ChannelParams& p) {
  Json j;
  j["G"] = p.G;
  j["kappa"] = p.kappa;
  j["n_bar"] = p.n_bar;
  j["Gamma_m"] = p.Gamma_m;
  j["tau"] = p.tau;
  j["thermalisation_rate"] = p.thermalisation_rate();
  j["cooperativity"] = p.n_bar * p.Gamma_m > 0.0 ? Json(p.cooperativity()) : Json(nullptr);
  j["adiabatic"] = p.adiabatic();
  return j;
}

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["state"] = to_json(c.state);
  Json ch = to_json(c.channel);
  ch.erase("thermalisation_rate");
  ch.erase("cooperativity");
  ch.erase("adiabatic");
  j["channel"] = ch;
  j["sweep"] = {{"axis", c.axis ? Json(to_string(*c.axis)) : Json(nullptr)}, {"values", c.sweep_values}};
  j["ensemble"] = {{"R", c.replicates},
                   {"count", c.count},
                   {"base_seed", c.base_seed},
                   {"effective_R", c.effective_replicates()},
                   {"effective_count", c.effective_count()}};
  j["lambda"] = {{"min", c.lambda_min}, {"max", c.lambda_max}, {"points", c.lambda_points}};
  j["certify"] = {{"lambda_star", c.lambda_star ? Json(*c.lambda_star) : Json(nullptr)},
                  {"gamma_G", c.gamma_G ? Json(*c.gamma_G) : Json(nullptr)},
                  {"k_sigma", c.k_sigma}};
  j["output"] = {{"dir", c.out_dir}, {"name", c.name}};
  j["mode"] = to_string(c.mode);
  return j;
}

inline Json to_json(const Stat& s) { return {{"mean", s.mean}, {"std", s.std}}; }

inline Json to_json(const SweepPoint& p) {
  const EnsembleReport& e = p.ensemble;
  Json j;
  j["sweep_value"] = p.value;
  j["channel"] = to_json(e.params);
  j["coefficients"] = {{"c_Q", e.coefficients.c_Q}, {"c_E", e.coefficients.c_E}};
  j["count"] = e.count;
  j["base_seed"] = e.base_seed;
  j["seeds"] = e.seeds;
  j["curve"] = {{"a0", to_json(e.curve_coefficients[0])},
                {"a1", to_json(e.curve_coefficients[1])},
                {"a2", to_json(e.curve_coefficients[2])}};
  Json moments = Json::array();
  for (const auto& m : e.moments) {
    moments.push_back({{"phase", m.phase}, {"order", m.order}, {"mean", m.stat.mean}, {"std", m.stat.std}});
  }
  j["moments"] = moments;
  j["mixed_pq2"] = to_json(e.mixed);
  j["replicate_curves"] = e.replicate_coefficients;
  return j;
}

inline Json to_json(const Certificate& c) {
  Json j;
  j["lambda_star"] = c.lambda_star;
  j["v_mean"] = c.v_mean;
  j["v_std"] = c.v_std;
  j["threshold"] = c.threshold;
  j["margin"] = c.margin;
  j["k_sigma"] = c.k_sigma;
  j["nonclassical"] = c.nonclassical;
  j["nonclassical_grid_points"] = c.nonclassical_points;
  j["grid_points"] = c.grid_points;
  j["gamma"] = c.gamma ? Json(*c.gamma) : Json(nullptr);
  j["gamma_G"] = c.gamma_G ? Json(*c.gamma_G) : Json(nullptr);
  j["resource"] = c.resource ? Json(*c.resource) : Json(nullptr);
  return j;
}

/// Deterministic report: configuration echo, per-point seeds and statistics.
/// Wall-clock timings are kept out of it (see timing_json).
inline Json report_json(const SweepReport& r, std::string_view command) {
  Json j;
  j["command"] = command;
  j["config"] = to_json(r.config);
  Json pts = Json::array();
  for (const auto& p : r.points) pts.push_back(to_json(p));
  j["points"] = pts;
  return j;
}

inline Json timing_json(const Timings& t) {
  return {{"setup_seconds", t.setup_seconds},
          {"sampling_seconds", t.sampling_seconds},
          {"total_seconds", t.total_seconds},
          {"threads", t.threads}};
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

inline std::filesystem::path prepare_output_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError("output directory '" + dir + "' is not writable");
  }
  return dir;
}

struct OutputPaths {
  std::filesystem::path csv, json, timing;
};

/// Writes <name>.csv, <name>.json and <name>.timing.json into the output
/// directory. `extra` is merged into the JSON report.
inline OutputPaths write_report(const SweepReport& r, std::string_view command, const Json& extra = Json::object()) {
  const auto dir = prepare_output_dir(r.config.out_dir);
  OutputPaths p{dir / (r.config.name + ".csv"), dir / (r.config.name + ".json"),
                dir / (r.config.name + ".timing.json")};
  Json j = report_json(r, command);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  write_text(p.csv, plot_data(r));
  write_text(p.json, j.dump(2) + "\n");
  write_text(p.timing, timing_json(r.timings).dump(2) + "\n");
  return p;
}

// ---------------------------------------------------------------------------
// State inspection

/// Exact moments, curve coefficients and best margin of a state.
inline Json state_info(const ExperimentConfig& cfg) {
  cfg.state.validate();
  const auto basis = build_basis(cfg.state.dimension, PositionGrid::for_dimension(cfg.state.dimension));
  const auto state = make_state(cfg.state, basis);
  const auto m = exact_moment_set(state);
  Json j;
  j["state"] = to_json(cfg.state);
  j["leakage"] = state.leakage();
  j["purity"] = state.purity();
  Json moments = Json::array();
  for (const auto& e : m.entries()) moments.push_back({{"phase", e.phase}, {"order", e.order}, {"value", e.moment.value}});
  j["moments"] = moments;
  j["mixed_pq2"] = m.mixed_or_throw().value;
  const double a0 = m.value(phase::p, 2) - std::pow(m.value(phase::p, 1), 2);
  const double a1 = -3.0 * (m.mixed_or_throw().value - 2.0 * m.value(phase::p, 1) * m.value(phase::q, 2));
  const double a2 = 9.0 * (m.value(phase::q, 4) - std::pow(m.value(phase::q, 2), 2));
  j["curve"] = {{"a0", a0}, {"a1", a1}, {"a2", a2}};
  double best_lambda = 0.0, best_margin = -INFINITY;
  for (double l : cfg.lambdas()) {
    const double margin = classical_threshold(l) - nls_variance(m, l);
    if (margin > best_margin) {
      best_margin = margin;
      best_lambda = l;
    }
  }
  j["best_lambda"] = best_lambda;
  j["best_margin"] = best_margin;
  j["nonclassical"] = best_margin > 1e-9;
  return j;
}

}  // namespace nlsq

#endif
