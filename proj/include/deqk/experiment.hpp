#pragma once

// Experiments behind the CLI verbs. Each cmd_* computes everything in memory
// and returns the artifacts it would write; run_command flushes them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "deqk/config.hpp"
#include "deqk/dataset.hpp"
#include "deqk/equivalents.hpp"
#include "deqk/io.hpp"
#include "deqk/kernels.hpp"
#include "deqk/matching.hpp"
#include "deqk/simulate.hpp"
#include "deqk/spectra.hpp"
#include "deqk/svg.hpp"

namespace deqk {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNonConvergence = 3;
inline constexpr int kExitIo = 4;

struct CommandOutcome {
  ArtifactSet artifacts;
  int exit_code = kExitOk;
  std::vector<std::string> warnings;
};

inline void apply_threads(int threads) {
  if (threads <= 0) return;
#ifdef _OPENMP
  omp_set_num_threads(threads);
#endif
  Eigen::setNbThreads(threads);
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw dimension_error("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

inline DataMatrix experiment_data(const ExperimentConfig& c) {
  return sample_sphere(c.n, c.d, {c.seed, "data"});
}

inline DeqOptions deq_options(const ExperimentConfig& c) {
  return {c.tol, c.max_iter, c.weights, c.injection};
}

namespace detail {

inline CommandOutcome start(const ExperimentConfig& c) {
  CommandOutcome out;
  out.artifacts.add_json("config.json", to_json(c));
  return out;
}

inline std::string kernel_stem(KernelKind k) { return "kernel_" + std::string(to_string(k)); }

}  // namespace detail

/// Exact or equivalent kernel of the given kind; explicit kinds use the
/// activation matched to the implicit network with the configured signs.
inline KernelMatrix build_kernel(KernelKind kind, const DataMatrix& data, const ExperimentConfig& c) {
  const SigmaA2 s(c.sa2);
  switch (kind) {
    case KernelKind::ImplicitCK: return implicit_ck(data, s);
    case KernelKind::ImplicitNTK: return implicit_ntk(data, s);
    case KernelKind::ExplicitCK: return explicit_ck(data, match_ck(s, data.d(), c.signs).activation);
    case KernelKind::ExplicitNTK: return explicit_ntk(data, match_ntk(s, data.d(), c.signs).activation);
    case KernelKind::EquivalentCK: return materialize(implicit_ck_coeffs(s, data.d()), data);
    case KernelKind::EquivalentNTK: return materialize(implicit_ntk_coeffs(s, data.d()), data);
    default:
      throw config_error("kernel kind " + std::string(to_string(kind)) +
                         " is produced by the simulate command");
  }
}

inline CommandOutcome cmd_kernels(const ExperimentConfig& c) {
  auto out = detail::start(c);
  const auto data = experiment_data(c);
  std::vector<KernelMatrix> built;
  for (auto kind : c.kernel_kinds) built.push_back(build_kernel(kind, data, c));

  std::ostringstream data_csv;
  write_data_csv(data_csv, data);
  out.artifacts.add("data.csv", data_csv.str());
  json index = json::array();
  for (const auto& k : built) {
    out.artifacts.add_kernel(k, detail::kernel_stem(k.kind));
    index.push_back(detail::kernel_stem(k.kind) + ".json");
    for (const auto& v : check_invariants(k)) out.warnings.push_back(v);
  }
  out.artifacts.add_json("kernels.json", {{"kernels", index}});
  return out;
}

inline CommandOutcome cmd_match(const ExperimentConfig& c) {
  auto out = detail::start(c);
  const SigmaA2 s(c.sa2);
  out.artifacts.add_json("match_ck.json", to_json(match_ck(s, c.d, c.signs), c.sa2));
  out.artifacts.add_json("match_ntk.json", to_json(match_ntk(s, c.d, c.signs), c.sa2));
  return out;
}

inline CommandOutcome cmd_spectra(const ExperimentConfig& c) {
  auto out = detail::start(c);
  const auto data = experiment_data(c);
  json summary = json::object();
  for (auto kind : c.kernel_kinds) {
    const auto sp = eig_sym(build_kernel(kind, data, c));
    const std::string name(to_string(kind));
    out.artifacts.add("spectrum_" + name + ".csv", spectrum_csv(sp));
    out.artifacts.add("density_" + name + ".csv", histogram_csv(density(sp, c.bins)));
    summary[name] = {{"min", sp.eigenvalues.front()},
                     {"max", sp.eigenvalues.back()},
                     {"operator_norm",
                      std::max(std::abs(sp.eigenvalues.front()), std::abs(sp.eigenvalues.back()))}};
  }
  out.artifacts.add_json("spectra_summary.json", summary);
  return out;
}

// ---------------------------------------------------------------- convergence

/// Residual columns of the convergence table, in order.
inline const std::vector<std::string>& convergence_pairs() {
  static const std::vector<std::string> pairs = {"implicit_ck", "implicit_ntk", "explicit_ck",
                                                 "explicit_ntk", "matched_ck", "matched_ntk"};
  return pairs;
}

/// The four pairs whose medians must decrease; the matched ones compare the
/// implicit kernels with the explicit kernels of the matched activations.
inline constexpr std::size_t kEquivalencePairs = 4;

struct ConvergenceRow {
  long long n = 0;
  long long d = 0;
  int rep = 0;
  std::vector<double> residuals;  // aligned with convergence_pairs()
};

struct ConvergenceSweep {
  std::vector<ConvergenceRow> rows;
  std::vector<long long> n_values;
  std::vector<std::vector<double>> medians;  // [pair][n index]
  std::vector<bool> decreasing;              // per pair
  bool checked = false;
  bool monotone = true;  // all equivalence pairs strictly decreasing
};

inline ConvergenceRow convergence_point(long long n, long long d, int rep, const ExperimentConfig& c) {
  const SigmaA2 s(c.sa2);
  const RngSpec rng{c.seed, "convergence/n=" + std::to_string(n) + "/rep=" + std::to_string(rep)};
  const auto data = sample_sphere(n, d, rng.child("data"));
  const auto ck_act = match_ck(s, d, c.signs).activation;
  const auto ntk_act = match_ntk(s, d, c.signs).activation;
  const auto g = implicit_ck(data, s);
  const auto k = implicit_ntk_from_ck(g);
  const auto sigma = explicit_ck(data, ck_act);
  const auto theta = explicit_ntk(data, ntk_act);
  ConvergenceRow row{n, d, rep, {}};
  row.residuals = {
      relative_residual(g, materialize(implicit_ck_coeffs(s, d), data)),
      relative_residual(k, materialize(implicit_ntk_coeffs(s, d), data)),
      relative_residual(sigma, materialize(explicit_ck_coeffs(moments_quadratic(ck_act), d), data)),
      relative_residual(theta, materialize(explicit_ntk_coeffs(moments_quadratic(ntk_act), d), data)),
      relative_residual(g, sigma),
      relative_residual(k, theta),
  };
  return row;
}

inline ConvergenceSweep convergence_sweep(const ExperimentConfig& c) {
  ConvergenceSweep sw;
  sw.n_values = c.n_list;
  const std::size_t pairs = convergence_pairs().size();
  sw.medians.assign(pairs, {});
  for (long long n : c.n_list) {
    const long long d = std::llround(c.d_ratio * static_cast<double>(n));
    std::vector<std::vector<double>> per_pair(pairs);
    for (int r = 0; r < c.seeds; ++r) {
      sw.rows.push_back(convergence_point(n, d, r, c));
      for (std::size_t p = 0; p < pairs; ++p) per_pair[p].push_back(sw.rows.back().residuals[p]);
    }
    for (std::size_t p = 0; p < pairs; ++p) sw.medians[p].push_back(median(per_pair[p]));
  }
  sw.checked = c.n_list.size() > 1;
  for (std::size_t p = 0; p < pairs; ++p) {
    sw.decreasing.push_back(strictly_decreasing(sw.medians[p]));
    if (p < kEquivalencePairs && sw.checked && !sw.decreasing.back()) sw.monotone = false;
  }
  return sw;
}

inline CommandOutcome cmd_convergence(const ExperimentConfig& c) {
  auto out = detail::start(c);
  const auto sw = convergence_sweep(c);
  const auto& pairs = convergence_pairs();

  std::string table = "n,d,rep";
  for (const auto& p : pairs) table += "," + p;
  table += "\n";
  for (const auto& r : sw.rows) {
    table += std::to_string(r.n) + "," + std::to_string(r.d) + "," + std::to_string(r.rep);
    for (double v : r.residuals) table += "," + format_double(v);
    table += "\n";
  }
  out.artifacts.add("convergence.csv", table);

  std::string med = "n";
  for (const auto& p : pairs) med += "," + p;
  med += "\n";
  for (std::size_t i = 0; i < sw.n_values.size(); ++i) {
    med += std::to_string(sw.n_values[i]);
    for (std::size_t p = 0; p < pairs.size(); ++p) med += "," + format_double(sw.medians[p][i]);
    med += "\n";
  }
  out.artifacts.add("convergence_medians.csv", med);

  json per_pair = json::object();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    per_pair[pairs[p]] = {{"medians", sw.medians[p]},
                          {"strictly_decreasing", sw.checked ? json(bool(sw.decreasing[p])) : json()}};
  }
  out.artifacts.add_json("convergence_summary.json", {{"n_list", sw.n_values},
                                                      {"seeds", c.seeds},
                                                      {"monotonicity_checked", sw.checked},
                                                      {"monotone", sw.checked ? json(sw.monotone) : json()},
                                                      {"pairs", per_pair}});
  if (sw.checked && !sw.monotone) {
    out.warnings.push_back("residual medians are not strictly decreasing for every equivalence pair");
  }
  return out;
}

// ------------------------------------------------------------------- simulate

struct WidthRun {
  long long m = 0;
  int rep = 0;
  double residual = 0.0;  // ||G_hat - G*|| / ||G*||
  DeqRunDiagnostics diagnostics;
};

struct WidthSweep {
  std::vector<WidthRun> runs;
  std::vector<double> medians;  // per m over converged runs
  bool decreasing = false;
  bool all_converged = true;
};

/// Each repetition fixes its data set and redraws the weights for every width.
inline WidthSweep width_sweep(const ExperimentConfig& c) {
  WidthSweep sw;
  const SigmaA2 s(c.sa2);
  const auto opt = deq_options(c);
  std::vector<DataMatrix> data;
  std::vector<KernelMatrix> exact;
  for (int r = 0; r < c.seeds; ++r) {
    const RngSpec rng{c.seed, "width-sweep/rep=" + std::to_string(r)};
    data.push_back(sample_sphere(c.n, c.d, rng.child("data")));
    exact.push_back(implicit_ck(data.back(), s));
  }
  for (long long m : c.m_list) {
    std::vector<double> ok;
    for (int r = 0; r < c.seeds; ++r) {
      const RngSpec rng{c.seed, "width-sweep/rep=" + std::to_string(r) + "/m=" + std::to_string(m)};
      const auto run = deq_forward(data[r], m, s, rng, opt);
      WidthRun w{m, r, relative_residual(exact[r], empirical_ck_deq(run)), run.diagnostics};
      w.diagnostics.residual_history.clear();
      if (w.diagnostics.converged) ok.push_back(w.residual);
      else sw.all_converged = false;
      sw.runs.push_back(std::move(w));
    }
    sw.medians.push_back(ok.empty() ? std::nan("") : median(ok));
  }
  sw.decreasing = strictly_decreasing(sw.medians);
  return sw;
}

inline CommandOutcome cmd_simulate(const ExperimentConfig& c) {
  auto out = detail::start(c);
  const SigmaA2 s(c.sa2);
  const auto data = experiment_data(c);
  const auto run = deq_forward(data, c.m, s, {c.seed, "deq"}, deq_options(c));
  out.artifacts.add_json("diagnostics.json", to_json(run.diagnostics));
  if (!run.diagnostics.converged) {
    out.exit_code = kExitNonConvergence;
    out.warnings.push_back("DEQ fixed point did not converge in " + std::to_string(c.max_iter) +
                           " iterations (residual " + format_double(run.diagnostics.final_residual) + ")");
    return out;
  }

  const auto ck_act = match_ck(s, c.d, c.signs).activation;
  const auto ntk_act = match_ntk(s, c.d, c.signs).activation;
  const RngSpec explicit_rng{c.seed, "explicit"};
  const auto emp_ck = empirical_ck_deq(run);
  const auto emp_sigma = empirical_explicit_kernels(data, ck_act, c.p, explicit_rng, c.weights).ck;
  const auto emp_theta = empirical_explicit_kernels(data, ntk_act, c.p, explicit_rng, c.weights).ntk;
  out.artifacts.add_kernel(emp_ck, detail::kernel_stem(emp_ck.kind));
  out.artifacts.add_kernel(emp_sigma, detail::kernel_stem(emp_sigma.kind));
  out.artifacts.add_kernel(emp_theta, detail::kernel_stem(emp_theta.kind));
  out.artifacts.add_json(
      "residuals.json",
      {{"m", c.m},
       {"p", c.p},
       {"empirical_ck_vs_implicit_ck", relative_residual(implicit_ck(data, s), emp_ck)},
       {"empirical_explicit_ck_vs_explicit_ck", relative_residual(explicit_ck(data, ck_act), emp_sigma)},
       {"empirical_explicit_ntk_vs_explicit_ntk",
        relative_residual(explicit_ntk(data, ntk_act), emp_theta)}});

  if (!c.m_list.empty()) {
    const auto sw = width_sweep(c);
    std::string table = "m,rep,residual,converged,iterations,final_residual\n";
    for (const auto& r : sw.runs) {
      table += std::to_string(r.m) + "," + std::to_string(r.rep) + "," + format_double(r.residual) + "," +
               (r.diagnostics.converged ? "true" : "false") + "," +
               std::to_string(r.diagnostics.iterations) + "," +
               format_double(r.diagnostics.final_residual) + "\n";
    }
    out.artifacts.add("width_sweep.csv", table);
    json meds = json::array();
    for (double v : sw.medians) meds.push_back(std::isfinite(v) ? json(v) : json());
    out.artifacts.add_json("width_sweep_summary.json", {{"m_list", c.m_list},
                                                        {"medians", meds},
                                                        {"strictly_decreasing", sw.decreasing},
                                                        {"all_converged", sw.all_converged}});
    if (!sw.all_converged) {
      out.exit_code = kExitNonConvergence;
      out.warnings.push_back("some width-sweep runs did not converge");
    }
  }
  return out;
}

// --------------------------------------------------------------------- fig 1

struct Fig1Row {
  MatchResult match;
  MatchVerification verification;
};

struct Fig1Result {
  Fig1Row ck;
  Fig1Row ntk;
  double negative_control_ks = 0.0;  // CK with a1 shifted by kNegativeControlShift
};

inline constexpr double kNegativeControlShift = 0.1;

inline Fig1Result fig1(const ExperimentConfig& c) {
  const SigmaA2 s(c.sa2);
  const auto data = experiment_data(c);
  Fig1Result r;
  r.ck.match = match_ck(s, c.d, c.signs);
  r.ck.verification = verify_match(r.ck.match, data, s);
  r.ntk.match = match_ntk(s, c.d, c.signs);
  r.ntk.verification = verify_match(r.ntk.match, data, s);
  auto shifted = r.ck.match.activation;
  shifted.a1 += kNegativeControlShift;
  r.negative_control_ks = ks_distance(r.ck.verification.implicit_spectrum,
                                      eig_sym(explicit_ck(data, shifted)));
  return r;
}

inline CommandOutcome cmd_reproduce_fig1(const ExperimentConfig& c) {
  auto out = detail::start(c);
  const auto r = fig1(c);
  const auto emit_row = [&](const Fig1Row& row, const std::string& tag, const std::string& title) {
    const auto& v = row.verification;
    const std::string imp(to_string(v.implicit_spectrum.source_kind));
    const std::string exp(to_string(v.explicit_spectrum.source_kind));
    out.artifacts.add("spectrum_" + imp + ".csv", spectrum_csv(v.implicit_spectrum));
    out.artifacts.add("spectrum_" + exp + ".csv", spectrum_csv(v.explicit_spectrum));
    const auto [hi, he] = common_density(v.implicit_spectrum, v.explicit_spectrum, c.bins);
    out.artifacts.add("density_" + imp + ".csv", histogram_csv(hi));
    out.artifacts.add("density_" + exp + ".csv", histogram_csv(he));
    out.artifacts.add_json("activation_" + tag + ".json", to_json(row.match, c.sa2));
    out.artifacts.add("fig1_" + tag + ".svg",
                      overlay_svg({{hi, imp, "#1f77b4"}, {he, exp + " (matched quadratic)", "#d62728"}},
                                  title + ", n=" + std::to_string(c.n) + ", d=" + std::to_string(c.d) +
                                      ", sa2=" + format_double(c.sa2)));
  };
  emit_row(r.ck, "ck", "Conjugate kernel spectra");
  emit_row(r.ntk, "ntk", "Neural tangent kernel spectra");

  const double ks_ck = r.ck.verification.ks;
  out.artifacts.add_json(
      "summary.json",
      {{"n", c.n},
       {"d", c.d},
       {"sa2", c.sa2},
       {"seed", c.seed},
       {"ks_ck", ks_ck},
       {"ks_ntk", r.ntk.verification.ks},
       {"residual_ck", r.ck.verification.relative_residual},
       {"residual_ntk", r.ntk.verification.relative_residual},
       {"activation_ck", to_json(r.ck.match.activation)},
       {"activation_ntk", to_json(r.ntk.match.activation)},
       {"negative_control",
        {{"a1_shift", kNegativeControlShift},
         {"ks_ck", r.negative_control_ks},
         {"ratio_to_matched", ks_ck > 0 ? json(r.negative_control_ks / ks_ck) : json()}}}});
  return out;
}

// -------------------------------------------------------------------- driver

/// Computes the command, then writes its artifacts into c.output_dir.
template <class Command>
CommandOutcome run_command(Command&& cmd, const ExperimentConfig& c) {
  apply_threads(c.threads);
  CommandOutcome out = cmd(c);
  out.artifacts.flush(std::filesystem::path(c.output_dir));
  return out;
}

}  // namespace deqk
