#pragma once

// Experiment configuration: strict JSON loading with line-aware messages,
// validation, quick-mode scaling and the resolved-config echo.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "deqk/errors.hpp"
#include "deqk/io.hpp"
#include "deqk/kernels.hpp"
#include "deqk/matching.hpp"
#include "deqk/simulate.hpp"

namespace deqk {

struct ExperimentConfig {
  long long n = 1000;
  long long d = 1200;
  double sa2 = 0.2;
  std::uint64_t seed = 0;
  long long m = 2000;  // DEQ width
  long long p = 4000;  // explicit random-feature width
  int depth = 200;     // finite-depth recursion check
  int bins = 75;
  std::string output_dir = "out";
  std::vector<KernelKind> kernel_kinds = {KernelKind::ImplicitCK, KernelKind::ImplicitNTK,
                                          KernelKind::ExplicitCK, KernelKind::ExplicitNTK};
  SignChoice signs;
  std::vector<long long> n_list = {200, 400, 800};
  double d_ratio = 1.2;  // convergence sweep uses d = round(d_ratio * n)
  std::vector<long long> m_list;
  int seeds = 5;
  WeightLaw weights = WeightLaw::Gaussian;
  InjectionScaling injection = InjectionScaling::Unit;
  double tol = 1e-10;
  int max_iter = 10000;
  int threads = 0;  // 0 keeps the runtime default
  bool quick = false;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Line of each top-level key in the source file.
using KeyLines = std::map<std::string, int, std::less<>>;

namespace detail {

inline int line_at(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

// Scans raw JSON text for keys of the outermost object.
inline KeyLines top_level_key_lines(std::string_view text) {
  KeyLines out;
  int depth = 0, line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      --depth;
    } else if (c == '"') {
      const int start_line = line;
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) s += text[++i];
        else s += text[i];
        if (text[i] == '\n') ++line;
      }
      std::size_t j = i + 1;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) {
        if (text[j] == '\n') ++line;
        ++j;
      }
      if (depth == 1 && j < text.size() && text[j] == ':') out.emplace(s, start_line);
      i = j - 1;
    }
  }
  return out;
}

inline int line_of(const KeyLines& lines, std::string_view key) {
  const auto it = lines.find(key);
  return it == lines.end() ? 0 : it->second;
}

}  // namespace detail

inline std::optional<WeightLaw> weight_law_from_string(std::string_view s) {
  if (s == "gaussian") return WeightLaw::Gaussian;
  if (s == "rademacher") return WeightLaw::Rademacher;
  return std::nullopt;
}

inline std::optional<InjectionScaling> injection_from_string(std::string_view s) {
  if (s == "unit") return InjectionScaling::Unit;
  if (s == "per-width") return InjectionScaling::PerWidth;
  return std::nullopt;
}

inline KernelKind parse_kernel_kind(std::string_view s, int line = 0) {
  const auto k = kernel_kind_from_string(s);
  if (!k) throw config_error("unknown kernel kind '" + std::string(s) + "'", line);
  return *k;
}

inline json to_json(const ExperimentConfig& c) {
  json kinds = json::array();
  for (auto k : c.kernel_kinds) kinds.push_back(std::string(to_string(k)));
  return {{"n", c.n},
          {"d", c.d},
          {"sa2", c.sa2},
          {"seed", c.seed},
          {"m", c.m},
          {"p", c.p},
          {"depth", c.depth},
          {"bins", c.bins},
          {"output_dir", c.output_dir},
          {"kernel_kinds", kinds},
          {"signs", to_json(c.signs)},
          {"n_list", c.n_list},
          {"d_ratio", c.d_ratio},
          {"m_list", c.m_list},
          {"seeds", c.seeds},
          {"weights", std::string(to_string(c.weights))},
          {"injection", std::string(to_string(c.injection))},
          {"tol", c.tol},
          {"max_iter", c.max_iter},
          {"threads", c.threads},
          {"quick", c.quick}};
}

namespace detail {

class FieldReader {
 public:
  FieldReader(const json& j, const KeyLines& lines) : j_(j), lines_(lines) {}

  template <class Int>
  void integer(const char* key, Int& out) const {
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    if constexpr (std::is_unsigned_v<Int>) {
      if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
    }
    out = v.get<Int>();
  }

  void real(const char* key, double& out) const {
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_number()) fail(key, "expected a number");
    out = j_.at(key).get<double>();
  }

  void boolean(const char* key, bool& out) const {
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_boolean()) fail(key, "expected true or false");
    out = j_.at(key).get<bool>();
  }

  void string(const char* key, std::string& out) const {
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_string()) fail(key, "expected a string");
    out = j_.at(key).get<std::string>();
  }

  void integer_list(const char* key, std::vector<long long>& out) const {
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array()) fail(key, "expected an array of integers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number_integer()) fail(key, "expected an array of integers");
      out.push_back(e.get<long long>());
    }
  }

  void string_list(const char* key, std::vector<std::string>& out) const {
    const auto& v = j_.at(key);
    if (!v.is_array()) fail(key, "expected an array of strings");
    for (const auto& e : v) {
      if (!e.is_string()) fail(key, "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
  }

  int line(const char* key) const { return line_of(lines_, key); }

  [[noreturn]] void fail(const char* key, const std::string& what) const {
    throw config_error("key '" + std::string(key) + "': " + what, line(key));
  }

 private:
  const json& j_;
  const KeyLines& lines_;
};

}  // namespace detail

inline const std::vector<std::string_view>& config_keys() {
  static const std::vector<std::string_view> keys = {
      "n",     "d",      "sa2",     "seed",      "m",        "p",       "depth",
      "bins",  "output_dir", "kernel_kinds", "signs", "n_list", "d_ratio", "m_list",
      "seeds", "weights", "injection", "tol", "max_iter", "threads", "quick"};
  return keys;
}

/// Overlays the keys present in `text` onto `base`. Unknown keys and type
/// mismatches are rejected with the line of the offending key.
inline ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {},
                                     KeyLines* lines_out = nullptr) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw config_error(std::string("malformed JSON: ") + e.what(),
                       detail::line_at(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  if (!j.is_object()) throw config_error("config must be a JSON object", 1);
  const KeyLines lines = detail::top_level_key_lines(text);
  for (const auto& item : j.items()) {
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), item.key()) == keys.end()) {
      throw config_error("unknown key '" + item.key() + "'", detail::line_of(lines, item.key()));
    }
  }

  const detail::FieldReader r(j, lines);
  ExperimentConfig c = std::move(base);
  r.integer("n", c.n);
  r.integer("d", c.d);
  r.real("sa2", c.sa2);
  r.integer("seed", c.seed);
  r.integer("m", c.m);
  r.integer("p", c.p);
  r.integer("depth", c.depth);
  r.integer("bins", c.bins);
  r.string("output_dir", c.output_dir);
  if (j.contains("kernel_kinds")) {
    std::vector<std::string> names;
    r.string_list("kernel_kinds", names);
    c.kernel_kinds.clear();
    for (const auto& s : names) c.kernel_kinds.push_back(parse_kernel_kind(s, r.line("kernel_kinds")));
  }
  if (j.contains("signs")) {
    std::vector<long long> s;
    r.integer_list("signs", s);
    if (s.size() != 3) r.fail("signs", "expected three entries [s2, s1, s0]");
    c.signs = {static_cast<int>(s[0]), static_cast<int>(s[1]), static_cast<int>(s[2])};
  }
  r.integer_list("n_list", c.n_list);
  r.real("d_ratio", c.d_ratio);
  r.integer_list("m_list", c.m_list);
  r.integer("seeds", c.seeds);
  if (j.contains("weights")) {
    std::string s;
    r.string("weights", s);
    const auto w = weight_law_from_string(s);
    if (!w) r.fail("weights", "expected \"gaussian\" or \"rademacher\"");
    c.weights = *w;
  }
  if (j.contains("injection")) {
    std::string s;
    r.string("injection", s);
    const auto inj = injection_from_string(s);
    if (!inj) r.fail("injection", "expected \"unit\" or \"per-width\"");
    c.injection = *inj;
  }
  r.real("tol", c.tol);
  r.integer("max_iter", c.max_iter);
  r.integer("threads", c.threads);
  r.boolean("quick", c.quick);
  if (lines_out) *lines_out = lines;
  return c;
}

/// Checks every invariant; `lines` attributes failures to config-file lines.
inline void validate(const ExperimentConfig& c, const KeyLines& lines = {}) {
  const auto fail = [&](const char* key, const std::string& what) {
    throw config_error("key '" + std::string(key) + "': " + what, detail::line_of(lines, key));
  };
  if (!(c.sa2 >= 0.0 && c.sa2 < 1.0)) fail("sa2", "must satisfy 0 <= sa2 < 1, got " + format_double(c.sa2));
  if (c.n < 2) fail("n", "must be >= 2");
  if (c.d < 2) fail("d", "must be >= 2");
  if (c.m < 1) fail("m", "must be >= 1");
  if (c.p < 1) fail("p", "must be >= 1");
  if (c.depth < 1) fail("depth", "must be >= 1");
  if (c.bins < 2) fail("bins", "must be >= 2");
  if (c.output_dir.empty()) fail("output_dir", "must not be empty");
  if (c.kernel_kinds.empty()) fail("kernel_kinds", "must list at least one kind");
  if (std::set(c.kernel_kinds.begin(), c.kernel_kinds.end()).size() != c.kernel_kinds.size()) {
    fail("kernel_kinds", "contains duplicates");
  }
  for (int s : {c.signs.s2, c.signs.s1, c.signs.s0}) {
    if (s != 1 && s != -1) fail("signs", "entries must be +1 or -1");
  }
  if (c.n_list.empty()) fail("n_list", "must not be empty");
  if (!(c.d_ratio > 0.0 && std::isfinite(c.d_ratio))) fail("d_ratio", "must be positive");
  for (long long n : c.n_list) {
    if (n < 2) fail("n_list", "entries must be >= 2");
    if (std::llround(c.d_ratio * static_cast<double>(n)) < 2) fail("d_ratio", "gives d < 2");
  }
  for (long long m : c.m_list) {
    if (m < 1) fail("m_list", "entries must be >= 1");
  }
  if (c.seeds < 1) fail("seeds", "must be >= 1");
  if (!(c.tol > 0.0)) fail("tol", "must be positive");
  if (c.max_iter < 1) fail("max_iter", "must be >= 1");
  if (c.threads < 0) fail("threads", "must be >= 0");
}

/// Applies quick mode (n, d and n_list divided by 5, floored at 2) and clears
/// the flag, so the echoed config reruns the same experiment.
inline ExperimentConfig resolve(ExperimentConfig c) {
  if (c.quick) {
    const auto shrink = [](long long v) { return std::max(2LL, v / 5); };
    c.n = shrink(c.n);
    c.d = shrink(c.d);
    for (auto& n : c.n_list) n = shrink(n);
    c.quick = false;
  }
  return c;
}

}  // namespace deqk
