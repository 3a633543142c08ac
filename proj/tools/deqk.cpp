#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deqk/experiment.hpp"

namespace {

using deqk::ExperimentConfig;

// Command-line values; each one that is set replaces the config-file value.
struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  bool quick = false;
  std::optional<long long> n, d, m, p;
  std::optional<double> sa2, d_ratio, tol;
  std::optional<int> depth, bins, seeds, max_iter;
  std::optional<std::vector<std::string>> kinds;
  std::optional<std::vector<int>> signs;
  std::optional<std::vector<long long>> n_list, m_list;
  std::optional<std::string> weights, injection;
};

void register_flags(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config_path, "JSON config file");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--threads", o.threads, "Worker threads (0 = runtime default)");
  app.add_flag("--quick", o.quick, "Scale n, d and n_list down 5x");
  app.add_option("--n", o.n, "Number of data points");
  app.add_option("--d", o.d, "Input dimension");
  app.add_option("--sa2", o.sa2, "Recurrent weight variance sigma_a^2 in [0, 1)");
  app.add_option("--m", o.m, "DEQ width");
  app.add_option("--p", o.p, "Explicit random-feature width");
  app.add_option("--depth", o.depth, "Finite-depth recursion depth");
  app.add_option("--bins", o.bins, "Histogram bins");
  app.add_option("--kinds", o.kinds, "Kernel kinds")->delimiter(',');
  app.add_option("--signs", o.signs, "Sign triple s2,s1,s0")->delimiter(',')->expected(3);
  app.add_option("--n-list", o.n_list, "Sample sizes for the convergence sweep")->delimiter(',');
  app.add_option("--d-ratio", o.d_ratio, "d / n in the convergence sweep");
  app.add_option("--m-list", o.m_list, "Widths for the simulate sweep")->delimiter(',');
  app.add_option("--seeds", o.seeds, "Repetitions per sweep point");
  app.add_option("--weights", o.weights, "gaussian or rademacher");
  app.add_option("--injection", o.injection, "unit or per-width");
  app.add_option("--tol", o.tol, "DEQ fixed-point tolerance");
  app.add_option("--max-iter", o.max_iter, "DEQ iteration budget");
}

template <class T>
void set_if(const std::optional<T>& v, T& target) {
  if (v) target = *v;
}

ExperimentConfig resolve_config(const Overrides& o, deqk::KeyLines& lines) {
  ExperimentConfig c;
  if (o.config_path) c = deqk::parse_config(deqk::read_text_file(*o.config_path), {}, &lines);
  const auto flag = [&](const char* key) { lines.erase(key); };
  if (o.seed) c.seed = *o.seed, flag("seed");
  if (o.out) c.output_dir = *o.out, flag("output_dir");
  if (o.threads) c.threads = *o.threads, flag("threads");
  if (o.quick) c.quick = true;
  if (o.n) c.n = *o.n, flag("n");
  if (o.d) c.d = *o.d, flag("d");
  if (o.sa2) c.sa2 = *o.sa2, flag("sa2");
  if (o.m) c.m = *o.m, flag("m");
  if (o.p) c.p = *o.p, flag("p");
  if (o.depth) c.depth = *o.depth, flag("depth");
  if (o.bins) c.bins = *o.bins, flag("bins");
  if (o.seeds) c.seeds = *o.seeds, flag("seeds");
  if (o.max_iter) c.max_iter = *o.max_iter, flag("max_iter");
  if (o.d_ratio) c.d_ratio = *o.d_ratio, flag("d_ratio");
  if (o.tol) c.tol = *o.tol, flag("tol");
  if (o.n_list) c.n_list = *o.n_list, flag("n_list");
  if (o.m_list) c.m_list = *o.m_list, flag("m_list");
  if (o.kinds) {
    c.kernel_kinds.clear();
    for (const auto& k : *o.kinds) c.kernel_kinds.push_back(deqk::parse_kernel_kind(k));
    flag("kernel_kinds");
  }
  if (o.signs) c.signs = {(*o.signs)[0], (*o.signs)[1], (*o.signs)[2]}, flag("signs");
  if (o.weights) {
    const auto w = deqk::weight_law_from_string(*o.weights);
    if (!w) throw deqk::config_error("--weights: expected gaussian or rademacher");
    c.weights = *w;
  }
  if (o.injection) {
    const auto inj = deqk::injection_from_string(*o.injection);
    if (!inj) throw deqk::config_error("--injection: expected unit or per-width");
    c.injection = *inj;
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel lab for ReLU deep equilibrium networks"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  register_flags(app, o);

  using Command = std::function<deqk::CommandOutcome(const ExperimentConfig&)>;
  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> verbs = {
      {"kernels", {"Exact and matched kernel matrices", deqk::cmd_kernels}},
      {"match", {"Quadratic activations matched to the implicit kernels", deqk::cmd_match}},
      {"simulate", {"Finite-width DEQ and random-feature kernels", deqk::cmd_simulate}},
      {"convergence", {"Operator-norm residuals versus n", deqk::cmd_convergence}},
      {"reproduce-fig1", {"Implicit versus matched explicit spectra", deqk::cmd_reproduce_fig1}},
      {"spectra", {"Eigenvalues and densities of kernel matrices", deqk::cmd_spectra}},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, info] : verbs) subs[name] = app.add_subcommand(name, info.first);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return deqk::kExitConfig;
  }

  try {
    deqk::KeyLines lines;
    const ExperimentConfig c = deqk::resolve(resolve_config(o, lines));
    deqk::validate(c, lines);
    for (const auto& [name, info] : verbs) {
      if (!subs[name]->parsed()) continue;
      const auto out = deqk::run_command(info.second, c);
      for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
      return out.exit_code;
    }
  } catch (const deqk::io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return deqk::kExitIo;
  } catch (const deqk::convergence_error& e) {
    std::cerr << "non-convergence: " << e.what() << "\n";
    return deqk::kExitNonConvergence;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return deqk::kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return deqk::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return deqk::kExitConfig;
}
