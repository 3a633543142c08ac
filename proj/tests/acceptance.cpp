// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "deqk/experiment.hpp"
#include "deqk/gaussian.hpp"
#include "deqk/scalar_maps.hpp"

namespace {

using namespace deqk;
namespace fs = std::filesystem;

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

std::vector<double> sa2_grid(bool with_zero) {
  std::vector<double> g;
  for (int i = with_zero ? 0 : 1; i <= 9; ++i) g.push_back(0.1 * i);
  return g;
}

Verdict scalar_exactness() {
  double worst = std::max({std::abs(f_relu(1.0) - 1.0), std::abs(f_relu(0.0) - std::numbers::inv_pi),
                           std::abs(f_relu(-1.0))});
  for (double s : sa2_grid(true)) {
    worst = std::max(worst, std::abs(solve_g(1.0, SigmaA2(s)) - 1.0));
    worst = std::max(worst, std::abs(k_map(1.0, SigmaA2(s)) - 1.0 / (1.0 - s)));
  }
  return {worst <= 1e-12, "max abs error " + sci(worst) + " (tol 1e-12)"};
}

Verdict derivative_oracle() {
  constexpr double h = 1e-4;
  double worst = 0;
  double k_prime_02 = 0;
  for (double sv : sa2_grid(true)) {
    const SigmaA2 s(sv);
    const auto b = scalar_bundle(s);
    const auto g = [&](double x) { return solve_g(x, s); };
    const auto k = [&](double x) { return k_map(x, s); };
    const auto rel = [](double est, double ref) {
      return std::abs(est - ref) / std::max(std::abs(ref), 1e-300);
    };
    const auto first = [&](auto&& fn) { return (fn(h) - fn(-h)) / (2 * h); };
    const auto second = [&](auto&& fn) { return (fn(h) - 2 * fn(0.0) + fn(-h)) / (h * h); };
    worst = std::max({worst, rel(first(g), b.g_prime_0), rel(first(k), b.k_prime_0)});
    // At sa2 = 0 both second derivatives vanish; compare absolutely there.
    if (sv == 0.0) {
      worst = std::max({worst, std::abs(second(g)), std::abs(second(k))});
    } else {
      worst = std::max({worst, rel(second(g), b.g_dprime_0), rel(second(k), b.k_dprime_0)});
    }
    if (std::abs(sv - 0.2) < 1e-12) k_prime_02 = b.k_prime_0;
  }
  return {worst <= 1e-6, "max rel error " + sci(worst) + " (tol 1e-6); k'(0) at sa2=0.2 is " +
                             std::to_string(k_prime_02) + " (positive sign)"};
}

Verdict recursion_limit() {
  const SigmaA2 s(0.2);
  double worst = 0;
  for (int i = 0; i <= 40; ++i) {
    const double rho = -1.0 + i / 20.0;
    const auto r = scalar_recursion_oracle(rho, s, 200);
    worst = std::max({worst, std::abs(r.ck - solve_g(rho, s)), std::abs(r.ntk - k_map(rho, s))});
  }
  return {worst <= 1e-10, "max abs error " + sci(worst) + " over 41 rho (tol 1e-10)"};
}

Verdict gaussian_moments() {
  std::mt19937_64 eng(20240614);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  const auto rule = gauss_hermite(64);
  double worst = 0;
  const auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  for (int t = 0; t < 100; ++t) {
    const QuadraticActivation act{coef(eng), coef(eng), coef(eng)};
    const auto cf = moments_quadratic(act);
    const auto q = moments_quadrature(act, 64);
    worst = std::max({worst, rel(q.mean, cf.mean), rel(q.d_mean, cf.d_mean), rel(q.dd_mean, cf.dd_mean),
                      rel(q.sq_mean, cf.sq_mean), rel(q.d_sq_mean, cf.d_sq_mean)});
    const auto sig = [&](double x) { return act(x); };
    const auto dsig = [&](double x) { return act.derivative(x); };
    for (int i = 0; i <= 20; ++i) {
      const double rho = -1.0 + i / 10.0;
      worst = std::max(worst, rel(bivariate_quadrature(sig, sig, rho, rule), bivariate_sigma_sigma(act, rho)));
      worst = std::max(worst,
                       rel(bivariate_quadrature(dsig, dsig, rho, rule), bivariate_dsigma_dsigma(act, rho)));
    }
  }
  return {worst <= 1e-10, "max error " + sci(worst) + " over 100 activations x 21 rho (tol 1e-10)"};
}

Verdict matching_roundtrip() {
  double worst = 0, spread = 0;
  for (double sv : sa2_grid(false)) {
    const SigmaA2 s(sv);
    for (Eigen::Index d : {50, 1200}) {
      const auto ck0 = match_ck(s, d), ntk0 = match_ntk(s, d);
      for (int s2 : {1, -1})
        for (int s1 : {1, -1})
          for (int s0 : {1, -1}) {
            const SignChoice sc{s2, s1, s0};
            for (const auto& [r, r0] : {std::pair{match_ck(s, d, sc), ck0}, std::pair{match_ntk(s, d, sc), ntk0}}) {
              worst = std::max(worst, r.roundtrip_residual());
              spread = std::max({spread, std::abs(r.achieved.alpha - r0.achieved.alpha),
                                 std::abs(r.achieved.beta - r0.achieved.beta),
                                 std::abs(r.achieved.mu - r0.achieved.mu)});
            }
          }
    }
  }
  return {worst <= 1e-12 && spread <= 1e-12,
          "max roundtrip " + sci(worst) + ", max spread across signs " + sci(spread) + " (tol 1e-12)"};
}

ConvergenceSweep run_convergence() {
  ExperimentConfig c;
  c.sa2 = 0.2;
  c.n_list = {200, 400, 800};
  c.d_ratio = 1.2;
  c.seeds = 5;
  return convergence_sweep(c);
}

Verdict convergence(const ConvergenceSweep& sw) {
  std::string detail;
  bool ok = sw.checked;
  for (std::size_t p = 0; p < kEquivalencePairs; ++p) {
    ok = ok && sw.decreasing[p];
    detail += convergence_pairs()[p] + " [";
    for (std::size_t i = 0; i < sw.medians[p].size(); ++i) detail += (i ? " " : "") + sci(sw.medians[p][i]);
    detail += "] ";
  }
  return {ok, detail + "strictly decreasing medians over 5 seeds"};
}

Verdict fig1_reproduction(const Fig1Result& r, const ConvergenceSweep& sw) {
  const double ref_ck = sw.medians[4].front(), ref_ntk = sw.medians[5].front();
  const auto& ck = r.ck.verification;
  const auto& ntk = r.ntk.verification;
  const bool ok = ck.ks <= 0.05 && ntk.ks <= 0.05 && ck.relative_residual < ref_ck &&
                  ntk.relative_residual < ref_ntk;
  return {ok, "ks_ck " + sci(ck.ks) + ", ks_ntk " + sci(ntk.ks) + " (tol 0.05); residual_ck " +
                  sci(ck.relative_residual) + " < " + sci(ref_ck) + ", residual_ntk " +
                  sci(ntk.relative_residual) + " < " + sci(ref_ntk) + " (n=200 medians)"};
}

Verdict negative_control(const Fig1Result& r) {
  const double matched = r.ck.verification.ks;
  return {r.negative_control_ks > 3 * matched,
          "perturbed ks_ck " + sci(r.negative_control_ks) + " > 3 x " + sci(matched)};
}

Verdict finite_width() {
  ExperimentConfig c;
  c.sa2 = 0.2;
  c.n = 100;
  c.d = 120;
  c.m_list = {500, 2000, 8000};
  c.seeds = 5;
  const auto sw = width_sweep(c);
  double worst = 0;
  int converged = 0;
  for (const auto& run : sw.runs) {
    if (!run.diagnostics.converged) continue;
    ++converged;
    worst = std::max(worst, run.diagnostics.final_residual);
  }
  std::string meds;
  for (double v : sw.medians) meds += (meds.empty() ? "" : " ") + sci(v);
  return {sw.decreasing && worst <= 1e-10 && converged > 0,
          "medians [" + meds + "], " + std::to_string(converged) + "/" + std::to_string(sw.runs.size()) +
              " converged, max fixed-point residual " + sci(worst) + " (tol 1e-10)"};
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "deqk_acceptance_determinism";
  fs::remove_all(root);
  ExperimentConfig c;
  c.output_dir = (root / "run").string();
  run_command(cmd_reproduce_fig1, c);
  fs::rename(root / "run", root / "first");
  run_command(cmd_reproduce_fig1, c);
  int compared = 0, differing = 0;
  for (const auto& e : fs::directory_iterator(root / "first")) {
    const auto ext = e.path().extension();
    if (ext != ".csv" && ext != ".json") continue;
    ++compared;
    const auto other = root / "run" / e.path().filename();
    if (!fs::exists(other) || read_text_file(e.path()) != read_text_file(other)) ++differing;
  }
  fs::remove_all(root);
  return {compared > 0 && differing == 0,
          std::to_string(compared) + " CSV/JSON files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const char* name, const std::function<Verdict()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failures;
    std::printf("criterion %2d %-26s %s  %s [%.1f s]\n", id, name, v.pass ? "PASS" : "FAIL", v.detail.c_str(),
                secs);
    std::fflush(stdout);
  };

  report(1, "scalar exactness", scalar_exactness);
  report(2, "derivative oracle", derivative_oracle);
  report(3, "recursion limit", recursion_limit);
  report(4, "gaussian moments", gaussian_moments);
  report(5, "matching roundtrip", matching_roundtrip);

  ConvergenceSweep sweep;
  report(6, "convergence sweep", [&] {
    sweep = run_convergence();
    return convergence(sweep);
  });
  Fig1Result fig;
  report(7, "fig1 reproduction", [&] {
    if (sweep.medians.empty()) return Verdict{false, "needs criterion 6"};
    fig = fig1(ExperimentConfig{});
    return fig1_reproduction(fig, sweep);
  });
  report(8, "negative control", [&] {
    if (fig.ck.verification.implicit_spectrum.eigenvalues.empty()) return Verdict{false, "needs criterion 7"};
    return negative_control(fig);
  });
  report(9, "finite-width concentration", finite_width);
  report(10, "determinism", determinism);

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
