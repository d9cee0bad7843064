// Command-line front end: model analysis, simulation, filtering, duality
// checks and Monte Carlo experiments.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wonham/wonham.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wonham;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitViolation = 3;
constexpr int kExitIo = 4;

std::string g_invocation;

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw Error(ErrorCode::InvalidArgument, what + ": empty entry in '" + text + "'");
    item = item.substr(b, e - b + 1);
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end != item.c_str() + item.size()) throw Error(ErrorCode::InvalidArgument, what + ": bad number '" + item + "'");
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, what + ": non-finite entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, what + " is empty");
  return out;
}

Vector parse_vector(const std::string& text, Eigen::Index d, const std::string& what) {
  const Vector v = detail::to_eigen(parse_list(text, what));
  detail::require_size(v, d, what.c_str());
  return v;
}

ProbabilityVector parse_prior(const std::string& text, Eigen::Index d, const std::string& what) {
  if (text.empty()) return ProbabilityVector::uniform(d);
  return ProbabilityVector(parse_vector(text, d, what));
}

std::string provenance(std::uint64_t seed) {
  return "invocation: " + g_invocation + " | seed: " + std::to_string(seed);
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "cannot create directory " + dir.string());
}

json vector_json(const Vector& v) { return detail::to_std(v); }

json estimate_json(const Estimate& e) { return {{"mean", e.mean}, {"std_error", e.std_error}, {"n", e.n}}; }

void emit_json(const json& doc, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    auto os = open_output(out_path);
    os << doc.dump(2) << '\n';
  }
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string model;
  bool json = false;
  std::string out;
};

json analysis_json(const HmmModel& model, const StabilizabilityReport& rep, const ErgodicDecomposition& dec) {
  json classes = json::array();
  json invariants = json::array();
  for (std::size_t k = 0; k < dec.m(); ++k) {
    json states = json::array();
    for (auto x : dec.classes[k]) states.push_back(x + 1);
    classes.push_back(states);
    invariants.push_back(vector_json(invariant_measure(model, dec, k).values()));
  }
  json eig = json::array();
  for (const auto& l : rep.uc_eigenvalues) eig.push_back({l.real(), l.imag()});
  json doc = {{"model", model.name()},
              {"d", model.d()},
              {"ergodic_classes", classes},
              {"invariant_measures", invariants},
              {"controllable_dim", rep.controllable_dim},
              {"null_space_dim", rep.null_space_dim},
              {"is_controllable", rep.is_controllable},
              {"tests",
               {{"null_space_in_controllable", rep.nullspace_test},
                {"indicators_in_controllable", rep.indicator_test},
                {"uncontrollable_block_hurwitz", rep.hurwitz_test}}},
              {"uncontrollable_eigenvalues", eig},
              {"stabilizable", rep.verdict},
              {"verdict", rep.verdict ? "stabilizable" : "not stabilizable"}};
  if (rep.witness) doc["witness"] = vector_json(*rep.witness);
  return doc;
}

int run_analyze(const AnalyzeArgs& a) {
  const HmmModel model = load_model(a.model);
  const auto dec = ergodic_decomposition(model);
  const auto rep = stabilizability(model);
  const json doc = analysis_json(model, rep, dec);
  if (!a.out.empty()) emit_json(doc, a.out);
  if (a.json) {
    std::cout << doc.dump(2) << '\n';
    return kExitOk;
  }
  std::cout << "model: " << (model.name().empty() ? a.model : model.name()) << "  (d = " << model.d() << ")\n";
  std::cout << "ergodic classes: " << dec.m() << '\n';
  for (std::size_t k = 0; k < dec.m(); ++k) {
    std::cout << "  class " << k + 1 << ": {";
    for (std::size_t i = 0; i < dec.classes[k].size(); ++i) std::cout << (i ? ", " : "") << dec.classes[k][i] + 1;
    std::cout << "}  invariant measure " << detail::format_vector(invariant_measure(model, dec, k).values()) << '\n';
  }
  std::cout << "controllable subspace dimension: " << rep.controllable_dim << " of " << model.d() << '\n';
  std::cout << "null space of A in controllable subspace: " << (rep.nullspace_test ? "yes" : "no") << '\n';
  std::cout << "class indicators in controllable subspace: " << (rep.indicator_test ? "yes" : "no") << '\n';
  std::cout << "uncontrollable block Hurwitz: " << (rep.hurwitz_test ? "yes" : "no") << '\n';
  std::cout << "verdict: " << (rep.verdict ? "stabilizable" : "not stabilizable") << '\n';
  if (rep.witness) std::cout << "witness: " << detail::format_vector(*rep.witness) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string model;
  std::string prior;
  double T = 1.0;
  double dt = 1e-3;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::string out;
};

int run_simulate(const SimulateArgs& a) {
  const HmmModel model = load_model(a.model);
  const ProbabilityVector prior = parse_prior(a.prior, model.d(), "--prior");
  const std::size_t n = detail::grid_steps(a.T, a.dt);
  ensure_directory(a.out);
  for (std::size_t i = 0; i < a.trials; ++i) {
    const Trial tr = simulate_trial(model, prior, a.T, a.dt, RngStream(a.seed, i));
    const auto states = tr.path.grid_states(a.dt, n);
    {
      auto os = open_output(fs::path(a.out) / ("trial_" + std::to_string(i) + ".csv"));
      os << "# " << provenance(a.seed) << " | trial: " << i << '\n' << "t,X_t,dZ\n";
      for (std::size_t k = 0; k < n; ++k)
        os << format_double(static_cast<double>(k) * a.dt) << ',' << states[k] + 1 << ','
           << format_double(tr.obs.increments[k]) << '\n';
    }
    auto js = open_output(fs::path(a.out) / ("trial_" + std::to_string(i) + "_jumps.csv"));
    js << "# " << provenance(a.seed) << " | trial: " << i << " | initial state: " << tr.path.initial_state + 1
       << '\n'
       << "time,from,to\n";
    Eigen::Index x = tr.path.initial_state;
    for (std::size_t j = 0; j < tr.path.jump_times.size(); ++j) {
      js << format_double(tr.path.jump_times[j]) << ',' << x + 1 << ',' << tr.path.jump_targets[j] + 1 << '\n';
      x = tr.path.jump_targets[j];
    }
  }
  std::cerr << "wrote " << a.trials << " trial(s) to " << a.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- filter

struct FilterArgs {
  std::string model;
  std::string prior;
  std::string obs;
  std::string out;
  std::string scheme = "split";
  double dt = 0.0;
};

/// Reads a CSV with a dZ column (and optionally t); '#' lines are comments.
ObservationGrid read_observations(const std::string& path, double dt_flag) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open observation file " + path);
  std::string line;
  std::vector<std::string> header;
  int col_t = -1, col_dz = -1;
  std::vector<double> ts, dzs;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (header.empty()) {
      header = cells;
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "t") col_t = static_cast<int>(i);
        if (header[i] == "dZ") col_dz = static_cast<int>(i);
      }
      if (col_dz < 0) throw Error(ErrorCode::InvalidArgument, path + ": no dZ column");
      continue;
    }
    auto num = [&](int c) {
      if (c >= static_cast<int>(cells.size())) throw Error(ErrorCode::InvalidArgument, path + ": short row");
      return parse_list(cells[static_cast<std::size_t>(c)], path).front();
    };
    dzs.push_back(num(col_dz));
    if (col_t >= 0) ts.push_back(num(col_t));
  }
  ObservationGrid obs;
  obs.increments = std::move(dzs);
  if (dt_flag > 0.0) {
    obs.dt = dt_flag;
  } else if (ts.size() >= 2) {
    obs.dt = ts[1] - ts[0];
    for (std::size_t k = 0; k < ts.size(); ++k)
      if (std::abs(ts[k] - static_cast<double>(k) * obs.dt) > 1e-9 * std::max(1.0, ts[k]))
        throw Error(ErrorCode::GridMismatch, path + ": t column is not a uniform grid starting at 0");
  } else {
    throw Error(ErrorCode::InvalidArgument, path + ": cannot infer dt (pass --dt)");
  }
  if (!(obs.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  return obs;
}

int run_filter(const FilterArgs& a) {
  const HmmModel model = load_model(a.model);
  const ProbabilityVector prior = parse_prior(a.prior, model.d(), "--prior");
  FilterScheme scheme = FilterScheme::SplitStep;
  if (a.scheme == "euler")
    scheme = FilterScheme::EulerMaruyama;
  else if (a.scheme != "split")
    throw Error(ErrorCode::InvalidArgument, "--scheme must be split or euler");
  const ObservationGrid obs = read_observations(a.obs, a.dt);
  const FilterTrajectory traj = run_wonham(model, prior, obs, "prior", scheme);

  std::ostringstream body;
  body << "# " << provenance(0) << '\n' << 't';
  for (Eigen::Index x = 0; x < model.d(); ++x) body << ",pi_" << x + 1;
  body << ",dI\n";
  for (std::size_t k = 0; k < traj.posteriors.size(); ++k) {
    body << format_double(static_cast<double>(k) * obs.dt);
    for (Eigen::Index x = 0; x < model.d(); ++x) body << ',' << format_double(traj.posteriors[k][x]);
    body << ',' << format_double(k == 0 ? 0.0 : traj.innovations[k - 1]) << '\n';
  }
  if (a.out.empty()) {
    std::cout << body.str();
  } else {
    auto os = open_output(a.out);
    os << body.str();
  }
  return kExitOk;
}

// ---------------------------------------------------------------- duality-check

struct DualityArgs {
  std::string model;
  std::string mu;
  std::string pi0;
  std::string control = "zero";
  std::string f;
  double T = 1.0;
  double dt = 1e-3;
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
  double R = 0.0;
  bool no_halving = false;
  bool assert_pass = false;
  std::string out;
  int threads = 0;
};

int run_duality(const DualityArgs& a) {
  HmmModel model = load_model(a.model);
  if (a.R > 0.0) model = model.with_R(a.R);
  const ProbabilityVector mu = parse_prior(a.mu, model.d(), "--mu");
  const ProbabilityVector pi0 = parse_prior(a.pi0, model.d(), "--pi0");
  const Vector f = parse_vector(a.f, model.d(), "--f");
  const ControlSpec control = ControlSpec::parse(a.control);
  const auto rep = duality_check(model, mu, pi0, control, f, a.T, a.dt, {a.trials, a.seed, a.threads}, !a.no_halving);
  json doc = {{"provenance", provenance(a.seed)},
              {"control", rep.control},
              {"T", rep.T},
              {"dt", rep.dt},
              {"R", rep.R},
              {"trials", rep.n_trials},
              {"lhs", estimate_json(rep.lhs)},
              {"rhs", estimate_json(rep.rhs)},
              {"prior_mismatch", rep.prior_mismatch},
              {"cost",
               {{"terminal", rep.cost.terminal},
                {"running_gamma", rep.cost.running_gamma},
                {"running_control", rep.cost.running_control},
                {"total", rep.cost.total},
                {"std_error", rep.cost.std_error}}},
              {"difference", rep.difference},
              {"difference_half_step", rep.difference_half},
              {"dt_allowance", rep.dt_allowance},
              {"tolerance", rep.tolerance},
              {"passed", rep.passed}};
  emit_json(doc, a.out);
  if (!rep.passed) std::cerr << "duality check failed: |lhs - rhs| exceeds the tolerance\n";
  return (!rep.passed && a.assert_pass) ? kExitViolation : kExitOk;
}

// ---------------------------------------------------------------- experiment

struct ExperimentArgs {
  std::string mode;
  std::string model;
  std::string config;
  std::string mu;
  std::string nu;
  std::vector<std::string> f;
  double T = 10.0;
  double dt = 1e-3;
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
  std::string checkpoints;
  double threshold = -1.0;
  double min_fraction = 0.99;
  double max_mse = 0.01;
  std::string out;
  int threads = 0;
  CLI::App* app = nullptr;
};

/// Values from a JSON experiment file override flags given on the command
/// line; every such override is reported.
void apply_config_file(ExperimentArgs& a) {
  std::ifstream in(a.config);
  if (!in) throw Error(ErrorCode::Io, "cannot open config file " + a.config);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  auto warn_if_flag = [&](const char* flag) {
    if (a.app && a.app->count(flag) > 0)
      std::cerr << "warning: " << flag << " given on the command line is overridden by " << a.config << '\n';
  };
  auto list_text = [](const json& j) {
    std::string s;
    for (std::size_t i = 0; i < j.size(); ++i) s += (i ? "," : "") + format_double(j[i].get<double>());
    return s;
  };
  try {
    if (doc.contains("model")) {
      warn_if_flag("--model");
      if (doc["model"].is_string()) {
        fs::path p = doc["model"].get<std::string>();
        if (p.is_relative()) p = fs::path(a.config).parent_path() / p;
        a.model = p.string();
      } else {
        // inline model: write nothing, parse later from the stored text
        a.model = "inline:" + doc["model"].dump();
      }
    }
    if (doc.contains("mu")) {
      warn_if_flag("--mu");
      a.mu = list_text(doc["mu"]);
    }
    if (doc.contains("nu")) {
      warn_if_flag("--nu");
      a.nu = list_text(doc["nu"]);
    }
    if (doc.contains("f")) {
      warn_if_flag("--f");
      a.f.clear();
      const auto& jf = doc["f"];
      if (!jf.empty() && jf[0].is_array())
        for (const auto& row : jf) a.f.push_back(list_text(row));
      else
        a.f.push_back(list_text(jf));
    }
    if (doc.contains("checkpoints")) {
      warn_if_flag("--checkpoints");
      a.checkpoints = list_text(doc["checkpoints"]);
    }
    auto num = [&](const char* key, const char* flag, auto& dst) {
      if (!doc.contains(key)) return;
      warn_if_flag(flag);
      dst = doc[key].get<std::decay_t<decltype(dst)>>();
    };
    num("T", "--T", a.T);
    num("dt", "--dt", a.dt);
    num("trials", "--trials", a.trials);
    num("seed", "--seed", a.seed);
    num("threshold", "--threshold", a.threshold);
    num("min_fraction", "--min-fraction", a.min_fraction);
    num("max_mse", "--max-mse", a.max_mse);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
}

json checks_json(const ExperimentReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return checks;
}

int run_experiment(ExperimentArgs a) {
  if (!a.config.empty()) apply_config_file(a);
  if (a.model.empty()) throw Error(ErrorCode::InvalidArgument, "--model (or a config file with a model) is required");
  if (!(a.T > 0.0) || !(a.dt > 0.0) || a.trials == 0)
    throw Error(ErrorCode::InvalidArgument, "T, dt and trials must be positive");
  const HmmModel model = a.model.rfind("inline:", 0) == 0 ? parse_model(a.model.substr(7)) : load_model(a.model);

  ExperimentConfig cfg(model);
  cfg.mu = parse_prior(a.mu, model.d(), "mu");
  cfg.nu = parse_prior(a.nu, model.d(), "nu");
  for (const auto& f : a.f) cfg.f_list.push_back(parse_vector(f, model.d(), "f"));
  cfg.T = a.T;
  cfg.dt = a.dt;
  cfg.n_trials = a.trials;
  cfg.master_seed = a.seed;
  cfg.threads = a.threads;
  if (!a.checkpoints.empty()) cfg.checkpoints = parse_list(a.checkpoints, "checkpoints");
  if (a.threshold >= 0.0) cfg.stability_final_max = a.threshold;
  cfg.detection_min_fraction = a.min_fraction;
  cfg.detection_max_mse = a.max_mse;

  json verdict = {{"mode", a.mode}, {"provenance", provenance(a.seed)}, {"T", cfg.T}, {"dt", cfg.dt},
                  {"trials", cfg.n_trials}};
  ExperimentReport report;
  if (a.mode == "stability") {
    auto r = run_stability(cfg);
    verdict["worst_curve"] = r.curves[r.worst].label;
    verdict["final_value"] = r.curves[r.worst].final_value();
    report = std::move(r);
  } else if (a.mode == "detection") {
    auto r = run_detection(cfg);
    verdict["correct_fraction"] = r.correct_fraction;
    verdict["correct_fraction_std_error"] = r.correct_std_error;
    verdict["class_mse"] = r.class_mse;
    verdict["class_mse_std_error"] = r.class_mse_std_error;
    verdict["terminal_histogram"] = r.terminal_histogram;
    report = std::move(r);
  } else if (a.mode == "splitting") {
    auto r = run_splitting_check(cfg);
    verdict["max_deviation"] = r.max_deviation;
    report = std::move(r);
  } else if (a.mode == "martingale") {
    auto r = run_martingale_check(cfg);
    verdict["class_mass"] = r.class_mass;
    report = std::move(r);
  } else if (a.mode == "monotonicity") {
    auto r = run_monotonicity(cfg);
    verdict["closed_form_initial"] = r.closed_form_initial;
    report = std::move(r);
  } else if (a.mode == "necessity") {
    auto r = run_necessity_demo(cfg);
    verdict["witness"] = vector_json(r.witness);
    verdict["epsilon"] = r.epsilon;
    verdict["mu"] = vector_json(r.mu);
    verdict["nu"] = vector_json(r.nu);
    verdict["target"] = r.target;
    verdict["final_value"] = r.final_value;
    verdict["prior_mismatch"] = r.prior_mismatch;
    verdict["expected_prior_mismatch"] = r.expected_mismatch;
    report = std::move(r);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown experiment mode " + a.mode);
  }
  verdict["checks"] = checks_json(report);
  verdict["notes"] = report.notes;
  verdict["passed"] = report.passed();

  if (!a.out.empty()) {
    ensure_directory(a.out);
    for (const auto& c : report.curves) {
      auto os = open_output(fs::path(a.out) / (a.mode + "_" + c.label + ".csv"));
      write_curve_csv(os, c, provenance(a.seed));
    }
    auto vs = open_output(fs::path(a.out) / "verdict.json");
    vs << verdict.dump(2) << '\n';
  }
  std::cout << verdict.dump(2) << '\n';
  for (const auto& c : report.checks)
    if (!c.passed) std::cerr << "check failed: " << c.name << " (" << c.detail << ")\n";
  return report.passed() ? kExitOk : kExitViolation;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g_invocation += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"Wonham filter toolkit: stabilizability analysis, simulation, filtering and Monte Carlo checks"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: WONHAM_THREADS or hardware concurrency)")
      ->check(CLI::PositiveNumber);

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand(
      "analyze",
      "Ergodic classes, invariant measures, the controllable subspace (smallest subspace containing 1 and closed "
      "under A and multiplication by h) and the stabilizability verdict with a witness when it fails");
  analyze->add_option("--model", an.model, "model JSON file")->required();
  analyze->add_flag("--json", an.json, "print the report as JSON");
  analyze->add_option("--out", an.out, "also write the JSON report to this file");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand(
      "simulate", "Exact simulation of the Markov chain and of the observation increments dZ = h(X) dt + dW");
  simulate->add_option("--model", sim.model, "model JSON file")->required();
  simulate->add_option("--prior", sim.prior, "initial law, comma separated (default uniform)");
  simulate->add_option("--T", sim.T, "horizon")->check(CLI::PositiveNumber);
  simulate->add_option("--dt", sim.dt, "grid step")->check(CLI::PositiveNumber);
  simulate->add_option("--trials", sim.trials, "number of trials")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "master seed");
  simulate->add_option("--out", sim.out, "output directory")->required();

  FilterArgs fa;
  auto* filter = app.add_subcommand(
      "filter",
      "Run the Wonham filter (posterior of the chain given the observations) on a dZ file; writes t, pi_1..pi_d, "
      "dI where dI is the innovation over the preceding step");
  filter->add_option("--model", fa.model, "model JSON file")->required();
  filter->add_option("--prior", fa.prior, "filter prior, comma separated (default uniform)");
  filter->add_option("--obs", fa.obs, "CSV with a dZ column and a t column (as written by simulate)")->required();
  filter->add_option("--out", fa.out, "output CSV (default stdout)");
  filter->add_option("--scheme", fa.scheme, "split (default) or euler");
  filter->add_option("--dt", fa.dt, "grid step when the file has no t column")->check(CLI::PositiveNumber);

  DualityArgs du;
  auto* duality = app.add_subcommand(
      "duality-check",
      "Monte Carlo check of the duality principle: E|f(X_T) - S_T|^2 equals the optimal-control cost of the "
      "backward dual equation plus the prior-mismatch term |pi0(Y_0) - mu(Y_0)|^2");
  duality->add_option("--model", du.model, "model JSON file")->required();
  duality->add_option("--mu", du.mu, "law of X_0 (default uniform)");
  duality->add_option("--pi0", du.pi0, "prior used by the estimator (default uniform)");
  duality->add_option("--control", du.control, "zero, const:C or sin");
  duality->add_option("--f", du.f, "terminal function, comma separated")->required();
  duality->add_option("--T", du.T, "horizon")->check(CLI::PositiveNumber);
  duality->add_option("--dt", du.dt, "grid step")->check(CLI::PositiveNumber);
  duality->add_option("--trials", du.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
  duality->add_option("--seed", du.seed, "master seed");
  duality->add_option("--R", du.R, "override the observation noise variance")->check(CLI::PositiveNumber);
  duality->add_flag("--no-halving", du.no_halving, "skip the dt/2 run that sizes the discretization allowance");
  duality->add_flag("--assert", du.assert_pass, "exit with status 3 when the check fails");
  duality->add_option("--out", du.out, "write the JSON report here instead of stdout");

  ExperimentArgs ex;
  auto* experiment = app.add_subcommand("experiment", "Monte Carlo experiments on filter stability");
  experiment->require_subcommand(1);
  struct Mode {
    const char* name;
    const char* help;
  };
  const Mode modes[] = {
      {"stability", "Filter stability: E^mu |pi_t^mu(f) - pi_t^nu(f)|^2 over time for mu << nu"},
      {"detection", "Ergodic-class detection: pi_T^nu(1_k) against the class of X_0, trials under P^mu"},
      {"splitting", "Splitting identity: pi^nu = sum_k pi^nu(1_k) pi^{nu_k} with per-class priors nu_k, pathwise"},
      {"martingale", "Martingale property of the class masses pi_t^nu(1_k) under P^nu"},
      {"monotonicity", "Optimal value E|f(X_T) - pi_T(f)|^2 under an invariant prior is non-increasing in T"},
      {"necessity", "Non-stabilizable model: witness-based priors whose filters never merge"},
  };
  for (const auto& m : modes) {
    auto* sub = experiment->add_subcommand(m.name, m.help);
    sub->add_option("--model", ex.model, "model JSON file");
    sub->add_option("--config", ex.config, "JSON experiment file; its values win over flags");
    sub->add_option("--mu", ex.mu, "signal prior (default uniform)");
    sub->add_option("--nu", ex.nu, "filter prior (default uniform)");
    sub->add_option("--f", ex.f, "test function, comma separated; repeatable (default standard basis)");
    sub->add_option("--T", ex.T, "horizon")->check(CLI::PositiveNumber);
    sub->add_option("--dt", ex.dt, "grid step")->check(CLI::PositiveNumber);
    sub->add_option("--trials", ex.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
    sub->add_option("--seed", ex.seed, "master seed");
    sub->add_option("--checkpoints", ex.checkpoints, "times at which statistics are recorded");
    sub->add_option("--threshold", ex.threshold, "stability: maximum allowed final value");
    sub->add_option("--min-fraction", ex.min_fraction, "detection: minimum correct-class fraction");
    sub->add_option("--max-mse", ex.max_mse, "detection: maximum class-indicator mean-square error");
    sub->add_option("--out", ex.out, "output directory for curve CSVs and verdict.json");
    sub->callback([&ex, sub, name = std::string(m.name)] {
      ex.mode = name;
      ex.app = sub;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (analyze->parsed()) return run_analyze(an);
    if (simulate->parsed()) return run_simulate(sim);
    if (filter->parsed()) return run_filter(fa);
    if (duality->parsed()) {
      du.threads = threads;
      return run_duality(du);
    }
    if (experiment->parsed()) {
      ex.threads = threads;
      return run_experiment(ex);
    }
  } catch (const ModelValidationError& e) {
    for (const auto& issue : e.issues())
      std::cerr << "invalid model [" << to_string(issue.code) << "]: " << issue.message << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return e.code() == ErrorCode::Io ? kExitIo : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
