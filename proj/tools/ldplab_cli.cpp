// ldplab: command-line driver for simulations and LDP verification runs.
//
//   ldplab <subcommand> <config> [--dotted.key=value ...]
//
// Exit status: 0 all pass flags true, 1 some pass flag false, 2 parse error
// or missing config, 3 validation error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ldplab/assumptions.hpp"
#include "ldplab/config.hpp"
#include "ldplab/io.hpp"
#include "ldplab/ldp_verify.hpp"
#include "ldplab/rate.hpp"
#include "ldplab/sde.hpp"
#include "ldplab/skeleton.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ldplab;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitParse = 2;
constexpr int kExitInvalid = 3;

const std::vector<std::string> kReportFiles = {"report_lower.csv", "report_upper.csv", "report_tails.csv",
                                               "report_assumptions.csv", "rate.csv"};

RunOptions run_options(const RunConfig& rc) { return RunOptions{rc.samples, rc.seed, rc.workers}; }

/// Rewrites summary.json: config echo, the seeds of this subcommand, and
/// pass counts over every report CSV present in the output directory.
void update_summary(const RunConfig& rc, const std::string& command, const json& run_record) {
  const fs::path dir(rc.output_dir);
  const fs::path path = dir / "summary.json";
  json summary = json::object();
  if (fs::exists(path)) {
    std::ifstream in(path);
    summary = json::parse(in, nullptr, false);
    if (summary.is_discarded() || !summary.is_object()) summary = json::object();
  }
  json config = json::object();
  for (const auto& [k, v] : rc.source.entries()) config[k] = v;
  summary["config"] = config;
  if (!run_record.is_null()) summary["runs"][command] = run_record;
  json counts = json::object();
  std::size_t rows = 0;
  std::size_t passed = 0;
  for (const auto& name : kReportFiles) {
    if (!fs::exists(dir / name)) continue;
    const PassCount pc = count_passes(dir / name);
    counts[name] = {{"rows", pc.rows}, {"passed", pc.passed}};
    rows += pc.rows;
    passed += pc.passed;
  }
  summary["pass_counts"] = counts;
  summary["all_pass"] = rows == passed;
  write_text_file(path, summary.dump(2) + "\n");
}

json report_seeds(const LDPReport& report, std::uint64_t master) {
  json seeds = json::array();
  for (const auto& r : report.rows) seeds.push_back({{"epsilon", r.epsilon}, {"seed", r.seed}});
  return {{"master_seed", master},
          {"row_seeds", seeds},
          {"passed", report.pass_count()},
          {"rows", report.rows.size()},
          {"epsilon0", report.epsilon0 ? json(*report.epsilon0) : json(nullptr)},
          {"persistent", report.persistent}};
}

int cmd_simulate(const RunConfig& rc) {
  const double eps = rc.source.real_or("simulate.epsilon", rc.epsilons.front());
  const std::size_t paths = rc.source.integer_or("simulate.paths", 1);
  if (!(eps > 0.0 && eps <= 1.0)) throw ConfigValidationError("simulate.epsilon", "must lie in (0,1]");
  const TimeGrid grid(rc.steps);
  const fs::path dir = fs::path(rc.output_dir) / "paths";
  json seeds = json::array();
  for (std::size_t i = 0; i < paths; ++i) {
    const std::uint64_t seed = stream_seed(rc.seed, i);
    const WienerPath w = sample_wiener(grid, rc.noise, seed);
    const Trajectory path = solve_rescaled(rc.x, rc.basis, rc.model, SolverConfig{eps, rc.steps, seed}, w);
    char name[32];
    std::snprintf(name, sizeof name, "sample_%05zu.csv", i);
    write_text_file(dir / name, trajectory_csv(path));
    seeds.push_back(seed);
  }
  update_summary(rc, "simulate", {{"master_seed", rc.seed}, {"epsilon", eps}, {"path_seeds", seeds}});
  return kExitPass;
}

int cmd_skeleton(const RunConfig& rc) {
  const Trajectory z = solve_skeleton(rc.x, rc.control(), rc.model);
  write_text_file(fs::path(rc.output_dir) / "skeleton.csv", trajectory_csv(z));
  update_summary(rc, "skeleton", {{"energy", rc.control().energy()}});
  return kExitPass;
}

int cmd_rate(const RunConfig& rc) {
  const std::string target_path = rc.source.text("rate.target");
  Trajectory target = [&] {
    try {
      return read_trajectory_csv(target_path);
    } catch (const std::exception& e) {
      throw ConfigValidationError("rate.target", e.what());
    }
  }();
  if (target.dim() != rc.model.dim_h()) throw ConfigValidationError("rate.target", "column count does not match dim_h");
  RateOptions opt;
  opt.tol = rc.source.real_or("rate.tol", 1e-6);
  if (!(opt.tol > 0.0)) throw ConfigValidationError("rate.tol", "must be positive");
  const RateResult res = rate_of_target(rc.x, target, rc.model, opt);
  std::string csv = "value,residual,from_penalty,pass\n";
  csv += format_real(res.value) + ',' + format_real(res.residual) + ',' + (res.from_penalty ? "1" : "0") + ',' +
         (res.finite() ? "1" : "0") + '\n';
  write_text_file(fs::path(rc.output_dir) / "rate.csv", csv);
  update_summary(rc, "rate", {{"target", target_path}});
  return res.finite() ? kExitPass : kExitFail;
}

int cmd_verify_lower(const RunConfig& rc) {
  const TubeMethod method = rc.method == "direct" ? TubeMethod::direct : TubeMethod::importance;
  const LDPReport report =
      verify_lower_bound(rc.x, rc.basis, rc.control(), rc.delta, rc.gamma, rc.epsilons, rc.model, run_options(rc), method);
  write_text_file(fs::path(rc.output_dir) / "report_lower.csv", ldp_report_csv(report));
  update_summary(rc, "verify-lower", report_seeds(report, rc.seed));
  return report.all_pass() ? kExitPass : kExitFail;
}

int cmd_verify_upper(const RunConfig& rc) {
  const LDPReport report =
      verify_upper_bound(rc.x, rc.basis, rc.r, rc.delta, rc.gamma, rc.epsilons, rc.model, run_options(rc), rc.steps);
  write_text_file(fs::path(rc.output_dir) / "report_upper.csv", ldp_report_csv(report));
  update_summary(rc, "verify-upper", report_seeds(report, rc.seed));
  return report.all_pass() ? kExitPass : kExitFail;
}

int cmd_tails(const RunConfig& rc) {
  const auto& kv = rc.source;
  const TimeGrid grid(rc.steps);
  const std::size_t d = rc.basis.dim();
  const std::size_t m = rc.noise.dim();
  const double eta1 = kv.real_or("tails.eta1", 1.0);
  if (!(eta1 > 0.0)) throw ConfigValidationError("tails.eta1", "must be positive");
  Operator xi = Operator::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
  if (kv.has("tails.xi")) {
    xi = detail::reshape_rows("tails.xi", kv.reals("tails.xi"), d, m);
  } else {
    xi(0, 0) = std::sqrt(eta1);
  }
  if (xi.squaredNorm() > eta1 * (1.0 + 1e-12)) throw ConfigValidationError("tails.xi", "integrated HS norm exceeds tails.eta1");
  const std::vector<Operator> xi_steps(rc.steps, xi);
  const auto deltas = kv.reals_or("tails.deltas", {1.0, 2.0, 3.0, 4.0});
  RunOptions run = run_options(rc);

  std::vector<TailRow> rows;
  run.seed = stream_seed(rc.seed, 1);
  auto cm = chow_menaldi_check(xi_steps, grid, eta1, deltas, run);
  rows.insert(rows.end(), cm.begin(), cm.end());

  const double alpha0 = kv.real_or("tails.alpha0", 0.4);
  const double p0 = kv.real_or("tails.p0", 1.5);
  const double eta2 = convolution_eta(rc.basis, xi, alpha0);
  const TailBoundParams params = detail::rethrow_as("tails.p0", [&] { return make_tail_bound_params(rc.basis, alpha0, p0, eta2); });
  run.seed = stream_seed(rc.seed, 2);
  auto pz = peszat_convolution_check(rc.basis, xi, params, grid, kv.reals_or("tails.peszat_deltas", deltas), run);
  rows.insert(rows.end(), pz.begin(), pz.end());

  run.seed = stream_seed(rc.seed, 3);
  auto wr = wiener_ldp_check(rc.noise, rc.epsilons, kv.reals_or("tails.wiener_radii", {0.25, 0.5, 1.0, 2.0}), grid, run);
  rows.insert(rows.end(), wr.begin(), wr.end());

  write_text_file(fs::path(rc.output_dir) / "report_tails.csv", tail_report_csv(rows));
  const bool ok = std::all_of(rows.begin(), rows.end(), [](const TailRow& r) { return r.pass; });
  update_summary(rc, "tails",
                 {{"master_seed", rc.seed},
                  {"stream_seeds", {stream_seed(rc.seed, 1), stream_seed(rc.seed, 2), stream_seed(rc.seed, 3)}},
                  {"kappa", params.kappa},
                  {"c_const", params.c_const},
                  {"eta2", eta2}});
  return ok ? kExitPass : kExitFail;
}

int cmd_assumptions(const RunConfig& rc) {
  const auto& kv = rc.source;
  const double radius = kv.real_or("assumptions.r", 1.0);
  if (!(radius > 0.0)) throw ConfigValidationError("assumptions.r", "must be positive");
  const double a = kv.real_or("assumptions.a", 0.5);
  if (!(a > 0.0 && a <= 1.0)) throw ConfigValidationError("assumptions.a", "must lie in (0,1]");
  const std::uint64_t seed = kv.integer_or("assumptions.seed", 7);
  std::string csv = "test,parameter,value,bound,pass\n";
  bool ok = true;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n <= rc.model.dim_u(); ++n) {
    const double tail = check_a1_tail(rc.model, radius, n, seed);
    const bool pass = tail <= previous && (n < rc.model.dim_u() || tail == 0.0);
    ok = ok && pass;
    csv += "a1_tail," + std::to_string(n) + ',' + format_real(tail) + ',' + format_real(previous) + ',' + (pass ? "1" : "0") + '\n';
    previous = tail;
  }
  previous = std::numeric_limits<double>::infinity();
  for (double mesh : kv.reals_or("assumptions.meshes", {0.1, 0.01, 0.001, 0.0001})) {
    const double value = check_a2_modulus(rc.basis, a, mesh);
    const double bound = rc.basis.is_contraction() ? a2_log_bound(a, mesh) : previous;
    const bool pass = value <= bound && value <= previous;
    ok = ok && pass;
    csv += "a2_modulus," + format_real(mesh) + ',' + format_real(value) + ',' + format_real(bound) + ',' + (pass ? "1" : "0") + '\n';
    previous = value;
  }
  write_text_file(fs::path(rc.output_dir) / "report_assumptions.csv", csv);
  update_summary(rc, "assumptions", {{"sample_seed", seed}});
  return ok ? kExitPass : kExitFail;
}

int cmd_report(const RunConfig& rc) {
  update_summary(rc, "report", nullptr);
  std::ifstream in(fs::path(rc.output_dir) / "summary.json");
  const json summary = json::parse(in);
  return summary.value("all_pass", false) ? kExitPass : kExitFail;
}

/// `--dotted.key=value` or `--dotted.key value` pairs left over by the parser.
std::vector<std::string> collect_overrides(const std::vector<std::string>& extras) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0) throw ConfigParseError("unexpected argument '" + arg + "'");
    std::string body = arg.substr(2);
    if (body.find('=') == std::string::npos) {
      if (i + 1 >= extras.size()) throw ConfigParseError("override '" + arg + "' has no value");
      body += "=" + extras[++i];
    }
    out.push_back(body);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and large-deviation verification runs for spectral SPDE models"};
  app.require_subcommand(1);
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&);
  };
  const std::vector<Command> commands = {
      {"simulate", "dump sample paths of the rescaled solution", cmd_simulate},
      {"skeleton", "solve and dump the controlled skeleton", cmd_skeleton},
      {"rate", "rate functional of a target path read from CSV", cmd_rate},
      {"verify-lower", "tube lower-bound rows", cmd_verify_lower},
      {"verify-upper", "enlarged level-set upper-bound rows", cmd_verify_upper},
      {"tails", "exponential tail bound checks", cmd_tails},
      {"assumptions", "A1 tail and A2 modulus reports", cmd_assumptions},
      {"report", "merge report CSVs into summary.json", cmd_report},
  };
  std::string config_path;
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("config", config_path, "run configuration file")->required();
    sub->allow_extras();
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }
  try {
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      KeyValueConfig kv = KeyValueConfig::load(config_path);
      kv.override_with(collect_overrides(subs[i]->remaining()));
      kv.apply_environment();
      const RunConfig rc = build_run_config(kv);
      return commands[i].run(rc);
    }
  } catch (const ConfigParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const ConfigValidationError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitParse;
}
