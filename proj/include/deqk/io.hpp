#pragma once

// JSON envelopes and CSV layouts for every artifact, and a buffered writer so
// that a command either fails before touching disk or writes all its files.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "deqk/equivalents.hpp"
#include "deqk/errors.hpp"
#include "deqk/format.hpp"
#include "deqk/kernels.hpp"
#include "deqk/matching.hpp"
#include "deqk/simulate.hpp"
#include "deqk/spectra.hpp"

namespace deqk {

using json = nlohmann::ordered_json;

inline json to_json(const QuadraticActivation& a) { return {{"a2", a.a2}, {"a1", a.a1}, {"a0", a.a0}}; }

inline json to_json(const SignChoice& s) { return json::array({s.s2, s.s1, s.s0}); }

inline json to_json(const EquivalentCoeffs& c) {
  return {{"kind", std::string(to_string(c.kind))}, {"alpha", c.alpha}, {"beta", c.beta},
          {"mu", c.mu}, {"d", c.d}};
}

/// Coefficients plus their provenance: sa2 for implicit kinds, the activation for explicit ones.
inline json coeffs_json(const EquivalentCoeffs& c, std::optional<double> sa2,
                        std::optional<QuadraticActivation> act) {
  json j = to_json(c);
  if (sa2) j["sa2"] = *sa2;
  if (act) j["activation"] = to_json(*act);
  return j;
}

inline json to_json(const MatchResult& r, double sa2) {
  return {{"sa2", sa2},
          {"signs", to_json(r.signs)},
          {"activation", to_json(r.activation)},
          {"target", to_json(r.target)},
          {"achieved", to_json(r.achieved)},
          {"roundtrip_residual", r.roundtrip_residual()}};
}

inline json to_json(const DeqRunDiagnostics& d) {
  return {{"converged", d.converged},
          {"iterations", d.iterations},
          {"final_residual", d.final_residual},
          {"residual_history", d.residual_history}};
}

inline json kernel_envelope(const KernelMatrix& k, const std::string& csv_path) {
  json j = {{"kind", std::string(to_string(k.kind))}, {"n", k.meta.n}, {"d", k.meta.d}};
  if (k.meta.sa2) j["sa2"] = *k.meta.sa2;
  if (k.meta.activation) j["activation"] = to_json(*k.meta.activation);
  j["path"] = csv_path;
  return j;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline std::string matrix_csv(const Eigen::MatrixXd& m) {
  std::ostringstream os;
  write_matrix_csv(os, m);
  return os.str();
}

inline std::string spectrum_csv(const Spectrum& s) {
  std::string out;
  for (double v : s.eigenvalues) out += format_double(v) + "\n";
  return out;
}

inline std::string histogram_csv(const DensityHistogram& h) {
  std::string out = "edge_low,edge_high,mass\n";
  for (std::size_t b = 0; b < h.mass.size(); ++b) {
    out += format_double(h.bin_edges[b]) + "," + format_double(h.bin_edges[b + 1]) + "," +
           format_double(h.mass[b]) + "\n";
  }
  return out;
}

/// Files accumulated in memory and written in insertion order by flush().
class ArtifactSet {
 public:
  void add(std::string name, std::string content) {
    files_.emplace_back(std::move(name), std::move(content));
  }

  void add_json(std::string name, const json& j) { add(std::move(name), dump(j)); }

  /// kernel_<Kind>.csv plus its kernel_<Kind>.json envelope.
  void add_kernel(const KernelMatrix& k, const std::string& stem) {
    add(stem + ".csv", matrix_csv(k.values));
    add_json(stem + ".json", kernel_envelope(k, stem + ".csv"));
  }

  const std::vector<std::pair<std::string, std::string>>& files() const noexcept { return files_; }

  void flush(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create directory " + dir.string() + ": " + ec.message());
    for (const auto& [name, content] : files_) {
      const auto path = dir / name;
      std::ofstream os(path, std::ios::binary | std::ios::trunc);
      if (!os) throw io_error("cannot open " + path.string() + " for writing");
      os.write(content.data(), static_cast<std::streamsize>(content.size()));
      if (!os) throw io_error("write failed for " + path.string());
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace deqk
