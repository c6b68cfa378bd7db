#ifndef LDPLAB_CONFIG_HPP
#define LDPLAB_CONFIG_HPP

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ldplab/model.hpp"
#include "ldplab/paths.hpp"
#include "ldplab/spectral.hpp"

namespace ldplab {

/// Malformed or missing configuration text.
class ConfigParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Well-formed configuration that violates a precondition; names the key.
class ConfigValidationError : public std::runtime_error {
public:
  ConfigValidationError(const std::string& key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

private:
  std::string key_;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline bool valid_key(const std::string& key) {
  if (key.empty() || key.front() == '.' || key.back() == '.') return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
  });
}

}  // namespace detail

/**
 * Flat `dotted.key = value` configuration. Blank lines and lines starting
 * with '#' are ignored; a repeated key is an error. Lists are comma or
 * whitespace separated.
 */
class KeyValueConfig {
public:
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<config>") {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string body = detail::trim(line);
      if (body.empty() || body.front() == '#') continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        throw ConfigParseError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      }
      const std::string key = detail::trim(std::string_view(body).substr(0, eq));
      if (!detail::valid_key(key)) throw ConfigParseError(origin + ":" + std::to_string(lineno) + ": bad key '" + key + "'");
      if (cfg.values_.count(key)) throw ConfigParseError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      cfg.values_[key] = detail::trim(std::string_view(body).substr(eq + 1));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParseError("cannot open config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse(text.str(), path);
  }

  /// Applies `key=value` overrides; the key need not exist yet.
  void override_with(const std::vector<std::string>& assignments) {
    for (const auto& a : assignments) {
      const auto eq = a.find('=');
      const std::string key = eq == std::string::npos ? std::string{} : detail::trim(std::string_view(a).substr(0, eq));
      if (!detail::valid_key(key)) throw ConfigParseError("override '" + a + "' is not of the form key=value");
      values_[key] = detail::trim(std::string_view(a).substr(eq + 1));
    }
  }

  /// LDP_SEED, when set, replaces run.seed.
  void apply_environment() {
    if (const char* env = std::getenv("LDP_SEED"); env && *env) values_["run.seed"] = detail::trim(env);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string text(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigValidationError(key, "missing required key");
    return it->second;
  }
  std::string text_or(const std::string& key, const std::string& fallback) const { return has(key) ? text(key) : fallback; }

  double real(const std::string& key) const { return parse_real(key, text(key)); }
  double real_or(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

  std::uint64_t integer(const std::string& key) const {
    const std::string s = text(key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw ConfigParseError(key + ": expected a nonnegative integer, got '" + s + "'");
    return v;
  }
  std::uint64_t integer_or(const std::string& key, std::uint64_t fallback) const { return has(key) ? integer(key) : fallback; }

  std::vector<double> reals(const std::string& key) const {
    std::string s = text(key);
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    std::vector<double> out;
    std::string token;
    while (in >> token) out.push_back(parse_real(key, token));
    return out;
  }
  std::vector<double> reals_or(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? reals(key) : fallback;
  }

private:
  static double parse_real(const std::string& key, const std::string& s) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ConfigParseError(key + ": expected a number, got '" + s + "'");
    return v;
  }

  std::map<std::string, std::string> values_;
};

/// Everything a subcommand needs, validated against the module preconditions.
struct RunConfig {
  SpectralBasis basis{std::vector<double>{0.0}};
  NoiseSpace noise{std::vector<double>{1.0}};
  ModelSpec model{1, 1, ZeroDrift{}, ConstantDiffusion{Operator::Identity(1, 1)}};
  std::size_t steps = 256;
  std::vector<double> epsilons{0.2, 0.1, 0.05, 0.02};
  HVec x = HVec::Zero(1);
  UVec control_value = UVec::Zero(1);
  std::optional<Eigen::MatrixXd> control_table;  // m x N
  double delta = 0.3;
  double gamma = 0.1;
  double r = 0.5;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  std::size_t workers = 0;
  std::string method = "importance";
  std::string output_dir = ".";
  KeyValueConfig source;

  ControlPath control() const {
    const TimeGrid grid(steps);
    if (control_table) {
      ControlPath c(grid, noise.dim());
      c.values = *control_table;
      return c;
    }
    return ControlPath::constant(grid, control_value);
  }
};

namespace detail {

inline Eigen::MatrixXd reshape_rows(const std::string& key, const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  if (v.size() != rows * cols) {
    throw ConfigValidationError(key, "expected " + std::to_string(rows * cols) + " entries (" + std::to_string(rows) + "x" +
                                         std::to_string(cols) + ", row-major), got " + std::to_string(v.size()));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i * cols + j];
  }
  return m;
}

inline Eigen::VectorXd vector_of(const std::string& key, const std::vector<double>& v, std::size_t n) {
  if (v.size() != n) throw ConfigValidationError(key, "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(n));
}

inline NuProfile nu_from(const KeyValueConfig& kv) {
  const std::string form = kv.text_or("model.nu.form", "constant");
  if (form == "constant") return NuProfile::constant(kv.real_or("model.nu.value", 1.0));
  if (form == "power") return NuProfile::power(kv.real_or("model.nu.scale", 1.0), kv.real("model.nu.exponent"));
  if (form == "table") return NuProfile::table(kv.reals("model.nu.table"));
  throw ConfigValidationError("model.nu.form", "unknown form '" + form + "' (constant | power | table)");
}

inline DriftForm drift_from(const KeyValueConfig& kv, std::size_t d) {
  const std::string form = kv.text_or("model.drift.form", "zero");
  if (form == "zero") return ZeroDrift{};
  if (form == "affine") {
    return AffineDrift{vector_of("model.drift.offset", kv.reals_or("model.drift.offset", std::vector<double>(d, 0.0)), d),
                       reshape_rows("model.drift.slope", kv.reals_or("model.drift.slope", std::vector<double>(d * d, 0.0)), d, d)};
  }
  if (form == "table") {
    const auto values = kv.reals("model.drift.table");
    if (values.size() % d != 0) throw ConfigValidationError("model.drift.table", "entry count must be a multiple of dim_h");
    return TableDrift{reshape_rows("model.drift.table", values, values.size() / d, d)};
  }
  throw ConfigValidationError("model.drift.form", "unknown form '" + form + "' (zero | affine | table)");
}

inline DiffusionForm diffusion_from(const KeyValueConfig& kv, std::size_t d, std::size_t m) {
  const std::string form = kv.text_or("model.diffusion.form", "constant");
  if (form == "constant") return ConstantDiffusion{reshape_rows("model.diffusion.matrix", kv.reals("model.diffusion.matrix"), d, m)};
  if (form == "diagonal") {
    return DiagonalLipschitzDiffusion{kv.reals("model.diffusion.sigma"), kv.real_or("model.diffusion.clip", 1.0)};
  }
  if (form == "affine") {
    AffineDiffusion f;
    f.offsets = reshape_rows("model.diffusion.offsets", kv.reals_or("model.diffusion.offsets", std::vector<double>(d * m, 0.0)), d, m);
    const auto slopes = kv.reals("model.diffusion.slopes");
    if (slopes.size() != m * d * d) {
      throw ConfigValidationError("model.diffusion.slopes", "expected m blocks of d x d, " + std::to_string(m * d * d) + " entries");
    }
    for (std::size_t k = 0; k < m; ++k) {
      std::vector<double> block(slopes.begin() + static_cast<std::ptrdiff_t>(k * d * d),
                                slopes.begin() + static_cast<std::ptrdiff_t>((k + 1) * d * d));
      f.slopes.push_back(reshape_rows("model.diffusion.slopes", block, d, d));
    }
    return f;
  }
  throw ConfigValidationError("model.diffusion.form", "unknown form '" + form + "' (constant | diagonal | affine)");
}

template <typename F>
auto rethrow_as(const std::string& key, F&& build) -> decltype(build()) {
  try {
    return build();
  } catch (const ConfigValidationError&) {
    throw;
  } catch (const ConfigParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigValidationError(key, e.what());
  }
}

}  // namespace detail

/// Builds and validates a RunConfig; errors name the offending key.
inline RunConfig build_run_config(const KeyValueConfig& kv) {
  RunConfig rc;
  rc.source = kv;
  const auto eig = kv.reals("basis.eigenvalues");
  if (kv.has("basis.dim") && kv.integer("basis.dim") != eig.size()) {
    throw ConfigValidationError("basis.dim", "does not match the number of eigenvalues");
  }
  rc.basis = detail::rethrow_as("basis.eigenvalues", [&] { return SpectralBasis(eig); });
  const auto weights = kv.reals("noise.weights");
  if (kv.has("noise.dim") && kv.integer("noise.dim") != weights.size()) {
    throw ConfigValidationError("noise.dim", "does not match the number of weights");
  }
  rc.noise = detail::rethrow_as("noise.weights", [&] { return NoiseSpace(weights); });
  const std::size_t d = rc.basis.dim();
  const std::size_t m = rc.noise.dim();

  std::optional<double> declared;
  if (kv.has("model.lambda")) declared = kv.real("model.lambda");
  const NuProfile nu = detail::rethrow_as("model.nu", [&] { return detail::nu_from(kv); });
  DriftForm drift = detail::drift_from(kv, d);
  DiffusionForm diffusion = detail::diffusion_from(kv, d, m);
  rc.model = detail::rethrow_as("model", [&] { return ModelSpec(d, m, drift, diffusion, nu, declared); });

  rc.steps = kv.integer_or("grid.steps", 256);
  if (rc.steps == 0) throw ConfigValidationError("grid.steps", "must be positive");
  rc.epsilons = kv.reals_or("run.epsilons", {0.2, 0.1, 0.05, 0.02});
  if (rc.epsilons.empty()) throw ConfigValidationError("run.epsilons", "must be nonempty");
  for (std::size_t i = 0; i < rc.epsilons.size(); ++i) {
    if (!(rc.epsilons[i] > 0.0 && rc.epsilons[i] <= 1.0)) throw ConfigValidationError("run.epsilons", "values must lie in (0,1]");
    if (i > 0 && !(rc.epsilons[i] < rc.epsilons[i - 1])) throw ConfigValidationError("run.epsilons", "must be strictly decreasing");
  }
  rc.x = detail::vector_of("run.x", kv.reals_or("run.x", std::vector<double>(d, 0.0)), d);

  const std::string control_form = kv.text_or("control.form", "constant");
  if (control_form == "constant") {
    rc.control_value = detail::vector_of("control.value", kv.reals_or("control.value", std::vector<double>(m, 0.0)), m);
  } else if (control_form == "table") {
    rc.control_table = detail::reshape_rows("control.table", kv.reals("control.table"), rc.steps, m).transpose();
  } else {
    throw ConfigValidationError("control.form", "unknown form '" + control_form + "' (constant | table)");
  }

  rc.delta = kv.real_or("run.delta", 0.3);
  if (!(rc.delta > 0.0)) throw ConfigValidationError("run.delta", "must be positive");
  rc.gamma = kv.real_or("run.gamma", 0.1);
  if (!(rc.gamma > 0.0)) throw ConfigValidationError("run.gamma", "must be positive");
  rc.r = kv.real_or("run.r", 0.5);
  if (!(rc.r > 0.0)) throw ConfigValidationError("run.r", "must be positive");
  rc.samples = kv.integer_or("run.samples", 10000);
  if (rc.samples == 0) throw ConfigValidationError("run.samples", "must be positive");
  rc.seed = kv.integer_or("run.seed", 1);
  rc.workers = kv.integer_or("run.workers", 0);
  rc.method = kv.text_or("run.method", "importance");
  if (rc.method != "importance" && rc.method != "direct") {
    throw ConfigValidationError("run.method", "must be 'importance' or 'direct'");
  }
  rc.output_dir = kv.text_or("output.dir", ".");
  return rc;
}

}  // namespace ldplab

#endif  // LDPLAB_CONFIG_HPP
