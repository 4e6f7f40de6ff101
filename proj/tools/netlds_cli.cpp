// netlds command line: simulate, estimate, experiment, plot-data, replay.

#include "netlds/ensemble.hpp"
#include "netlds/estimators.hpp"
#include "netlds/experiments.hpp"
#include "netlds/graph.hpp"
#include "netlds/io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace netlds;

namespace {

GraphTopology resolve_graph(const std::string& graph, Index m) {
  if (graph == "path" || graph == "complete" || graph == "star") return GraphTopology::make(graph_kind_from_string(graph), m);
  GraphTopology g = GraphTopology::load_edge_list(graph);
  if (g.nodes() != m)
    throw std::invalid_argument("edge list " + graph + " has " + std::to_string(g.nodes()) + " nodes, bundle has " +
                                std::to_string(m));
  return g;
}

struct SimulateArgs {
  Index m = 0;
  Index d = 10;
  Index horizon = 5;
  double beta = 1.0;
  bool raw = false;
  std::string noise = "gaussian";
  std::uint64_t seed = 0;
  int threads = 1;
  std::string ensemble_in;
  std::string ensemble_out;
  std::string bundle_out;
};

int run_simulate(const SimulateArgs& a) {
  SystemEnsemble truth = [&] {
    if (!a.ensemble_in.empty()) return io::load_ensemble(a.ensemble_in);
    if (a.m < 2) throw std::invalid_argument("simulate needs --m >= 2 or --ensemble-in");
    SystemEnsemble e = sample_holder_ensemble(a.m, a.d, a.beta);
    return a.raw ? e : normalize_spectral_radius(e);
  }();
  if (!a.ensemble_out.empty()) io::save_ensemble(a.ensemble_out, truth);
  NoiseModel noise;
  noise.kind = noise_kind_from_string(a.noise);
  const TrajectoryBundle bundle = simulate(truth, a.horizon, noise, a.seed, a.threads);
  io::save_bundle(a.bundle_out, bundle);
  std::cerr << "simulated m=" << bundle.m << " d=" << bundle.d << " T=" << bundle.horizon << " -> " << a.bundle_out
            << '\n';
  return 0;
}

struct EstimateArgs {
  std::string bundle;
  std::string graph = "path";
  std::string method = "laplacian_smoothing";
  std::optional<double> lambda;
  std::string lambda_rule;
  std::optional<Index> tau;
  std::string tau_rule;
  double beta = 1.0;
  double r = 1.0;
  double delta = 0.05;
  double c_prime = 1.0;
  double rank_tol = -1.0;
  std::string truth;
  std::string out;
};

int run_estimate(const EstimateArgs& a) {
  const TrajectoryBundle bundle = io::load_bundle(a.bundle);
  const GraphTopology g = resolve_graph(a.graph, bundle.m);
  const LaplacianSpectrum spec = spectrum(build_laplacian(g));
  std::optional<SystemEnsemble> truth;
  if (!a.truth.empty()) truth = io::load_ensemble(a.truth);

  EstimatorConfig config;
  config.method = method_from_string(a.method);
  config.rank_tol = a.rank_tol;
  auto need_sm = [&]() -> double {
    if (!truth) throw std::invalid_argument("hyperparameter rules need --truth for the smoothness budget");
    return quadratic_variation(*truth, g);
  };
  const auto m = static_cast<double>(bundle.m);
  if (config.method == Method::LaplacianSmoothing) {
    if (a.lambda.has_value() == !a.lambda_rule.empty())
      throw std::invalid_argument("laplacian_smoothing needs exactly one of --lambda, --lambda-rule");
    if (a.lambda) {
      config.lambda = *a.lambda;
    } else {
      const LambdaRule rule = lambda_rule_from_string(a.lambda_rule);
      LambdaRuleParams p{a.r, static_cast<double>(bundle.d), m, static_cast<double>(bundle.horizon), 0.0, a.beta, 0.0};
      if (rule != LambdaRule::Benchmark) p.s_m = need_sm();
      if (rule == LambdaRule::StarBalance) p.p1 = star_p1(*truth, spec);
      config.lambda = lambda_rule(rule, p);
    }
  } else if (config.method == Method::SubspaceLS) {
    if (a.tau.has_value() == !a.tau_rule.empty())
      throw std::invalid_argument("subspace_ls needs exactly one of --tau, --tau-rule");
    if (a.tau) {
      config.tau = *a.tau;
    } else {
      const TauRule rule = tau_rule_from_string(a.tau_rule);
      TauRuleParams p;
      p.r = a.r;
      p.d = static_cast<double>(bundle.d);
      p.m = m;
      p.horizon = static_cast<double>(bundle.horizon);
      p.delta = a.delta;
      p.c_prime = a.c_prime;
      if (rule == TauRule::PathBalance) {
        p.s_m = need_sm();
        p.gamma2 = gamma_diagnostics(*truth, bundle.horizon, a.delta, a.r).gamma2;
      }
      config.tau = tau_rule(rule, p);
    }
  }
  EstimateSet est = estimate(bundle, g, spec, config);
  if (truth) attach_truth(est, *truth, bundle, g, a.delta, a.r);
  const std::string text = io::estimates_to_json(est);
  if (a.out.empty() || a.out == "-")
    std::cout << text << '\n';
  else
    io::write_file(a.out, text);
  const auto& diag = est.diagnostics;
  std::cerr << to_string(diag.method) << " hyper=" << diag.hyper << " fit_residual=" << diag.fit_residual;
  if (diag.mse) std::cerr << " mse=" << *diag.mse;
  std::cerr << '\n';
  return 0;
}

struct ExperimentArgs {
  std::string plan;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> threads;
  std::string out;
  bool quiet = false;
};

int run_experiment(const ExperimentArgs& a) {
  ExperimentPlan plan = load_plan(a.plan);
  if (a.seed) plan.master_seed = *a.seed;
  if (a.trials) plan.trials = *a.trials;
  if (a.threads) plan.threads = *a.threads;
  if (!a.out.empty()) plan.output = a.out;
  plan.validate();

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!plan.output.empty() && plan.output != "-") {
    file.open(plan.output, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write " + plan.output);
    out = &file;
  }
  *out << kCsvHeader << '\n';
  std::size_t failures = 0;
  const auto rows = run_plan(plan, [&](const MetricRow& row) {
    *out << format_csv_row(row) << '\n';
    out->flush();
    if (!row.ok()) ++failures;
  });
  if (!*out) throw std::runtime_error("write failed");
  if (!a.quiet) {
    std::cerr << rows.size() << " rows";
    if (failures) std::cerr << ", " << failures << " with estimator errors";
    std::cerr << '\n';
    for (const auto& s : summarize(rows))
      std::cerr << "  m=" << s.m << ' ' << s.method << " mean_rmse=" << s.mean_rmse << " std=" << s.std_rmse
                << " n=" << s.n << '\n';
  }
  return 0;
}

int run_plot_data(const std::string& csv, const std::string& prefix) {
  const auto rows = parse_csv(io::read_file(csv));
  for (const auto& file : write_plot_data(summarize(rows), prefix)) std::cout << file.string() << '\n';
  return 0;
}

struct ReplayArgs {
  std::string plan;
  Index m = 0;
  std::optional<int> trial;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> master_seed;
};

int run_replay(const ReplayArgs& a) {
  ExperimentPlan plan = load_plan(a.plan);
  if (a.master_seed) plan.master_seed = *a.master_seed;
  if (!a.trial && !a.seed) throw std::invalid_argument("replay needs --trial, --seed, or both");
  const int trial = a.trial.value_or(0);
  const std::uint64_t seed = a.seed ? *a.seed : trial_seed(plan.master_seed, a.m, trial);
  std::cout << kCsvHeader << '\n';
  for (const auto& row : replay(plan, a.m, trial, seed)) std::cout << format_csv_row(row) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint estimation of linear dynamical systems on a graph"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Sample (or load) an ensemble and simulate trajectories");
  simulate_cmd->add_option("--m", sim.m, "Number of nodes");
  simulate_cmd->add_option("--d", sim.d, "State dimension")->capture_default_str();
  simulate_cmd->add_option("-T,--horizon", sim.horizon, "Trajectory length T")->capture_default_str();
  simulate_cmd->add_option("--beta", sim.beta, "Hoelder exponent")->capture_default_str();
  simulate_cmd->add_flag("--raw", sim.raw, "Skip spectral-radius normalization");
  simulate_cmd->add_option("--noise", sim.noise, "gaussian or rademacher")->capture_default_str();
  simulate_cmd->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
  simulate_cmd->add_option("--threads", sim.threads, "Worker threads")->capture_default_str();
  simulate_cmd->add_option("--ensemble-in", sim.ensemble_in, "Use this ensemble file instead of sampling");
  simulate_cmd->add_option("--ensemble-out", sim.ensemble_out, "Write the ensemble here");
  simulate_cmd->add_option("--bundle-out", sim.bundle_out, "Write the trajectories here")->required();

  EstimateArgs est;
  std::optional<double> lambda;
  std::optional<Index> tau;
  auto* estimate_cmd = app.add_subcommand("estimate", "Estimate the system matrices from a trajectory bundle");
  estimate_cmd->add_option("--bundle", est.bundle, "Trajectory file")->required();
  estimate_cmd->add_option("--graph", est.graph, "path, complete, star, or an edge-list file")->capture_default_str();
  estimate_cmd->add_option("--method", est.method, "laplacian_smoothing, subspace_ls, nodewise_ols, pooled_ols")
      ->capture_default_str();
  estimate_cmd->add_option("--lambda", lambda, "Fixed lambda");
  estimate_cmd->add_option("--lambda-rule", est.lambda_rule, "path, complete, star, benchmark");
  estimate_cmd->add_option("--tau", tau, "Fixed tau");
  estimate_cmd->add_option("--tau-rule", est.tau_rule, "path, benchmark");
  estimate_cmd->add_option("--beta", est.beta, "Hoelder exponent for the benchmark lambda rule")->capture_default_str();
  estimate_cmd->add_option("--r", est.r, "Subgaussian noise constant")->capture_default_str();
  estimate_cmd->add_option("--delta", est.delta, "Confidence level")->capture_default_str();
  estimate_cmd->add_option("--c-prime", est.c_prime, "Constant of the path tau rule")->capture_default_str();
  estimate_cmd->add_option("--rank-tol", est.rank_tol, "Pseudo-inverse cutoff (negative: default)");
  estimate_cmd->add_option("--truth", est.truth, "True ensemble, enables mse and rule inputs");
  estimate_cmd->add_option("--out", est.out, "Output file (default stdout)");

  ExperimentArgs exp;
  std::optional<std::uint64_t> exp_seed;
  std::optional<int> exp_trials, exp_threads;
  auto* experiment_cmd = app.add_subcommand("experiment", "Run a Monte Carlo plan and write the CSV");
  experiment_cmd->add_option("plan", exp.plan, "Plan file (JSON)")->required();
  experiment_cmd->add_option("--seed", exp_seed, "Override the master seed");
  experiment_cmd->add_option("--trials", exp_trials, "Override the trial count");
  experiment_cmd->add_option("--threads", exp_threads, "Override the worker count");
  experiment_cmd->add_option("--out", exp.out, "Override the output path ('-' for stdout)");
  experiment_cmd->add_flag("--quiet", exp.quiet, "No summary on stderr");

  std::string plot_csv, plot_prefix;
  auto* plot_cmd = app.add_subcommand("plot-data", "Write per-method mean/std tables from a results CSV");
  plot_cmd->add_option("csv", plot_csv, "Results CSV")->required();
  plot_cmd->add_option("--prefix", plot_prefix, "Output prefix; files are <prefix>_<method>.csv")->required();

  ReplayArgs rep;
  std::optional<int> rep_trial;
  std::optional<std::uint64_t> rep_seed, rep_master;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run one trial of a plan");
  replay_cmd->add_option("plan", rep.plan, "Plan file (JSON)")->required();
  replay_cmd->add_option("--m", rep.m, "Node count of the row")->required();
  replay_cmd->add_option("--trial", rep_trial, "Trial number of the row");
  replay_cmd->add_option("--seed", rep_seed, "Seed column of the row");
  replay_cmd->add_option("--master-seed", rep_master, "Override the plan's master seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate_cmd) return run_simulate(sim);
    if (*estimate_cmd) {
      est.lambda = lambda;
      est.tau = tau;
      return run_estimate(est);
    }
    if (*experiment_cmd) {
      exp.seed = exp_seed;
      exp.trials = exp_trials;
      exp.threads = exp_threads;
      return run_experiment(exp);
    }
    if (*plot_cmd) return run_plot_data(plot_csv, plot_prefix);
    if (*replay_cmd) {
      rep.trial = rep_trial;
      rep.seed = rep_seed;
      rep.master_seed = rep_master;
      return run_replay(rep);
    }
  } catch (const std::exception& e) {
    std::cerr << "netlds: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
