#pragma once

#include "netlds/ensemble.hpp"
#include "netlds/estimators.hpp"
#include "netlds/graph.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace netlds {

/// One column of the estimator grid. A LaplacianSmoothing entry carries
/// either a fixed lambda or a lambda rule; a SubspaceLS entry either a fixed
/// tau or a tau rule.
struct MethodSpec {
  Method method = Method::NodewiseOLS;
  std::string label;                 ///< CSV "method" column; defaults to the method name
  std::optional<double> lambda;
  std::optional<LambdaRule> lambda_rule;
  std::optional<Index> tau;
  std::optional<TauRule> tau_rule;
  double c_prime = 1.0;              ///< constant of the path tau rule
  double rank_tol = -1.0;
};

struct ExperimentPlan {
  static constexpr int kSchemaVersion = 1;

  GraphKind graph = GraphKind::Path;
  Index d = 10;
  std::vector<Index> m_values;
  Index horizon = 5;
  double beta = 1.0;
  NoiseModel noise;
  int trials = 30;
  std::vector<MethodSpec> methods;
  std::uint64_t master_seed = 0;
  std::string output;
  bool normalize = true;
  double delta = 0.05;               ///< confidence level fed to the gamma / tau formulas
  int threads = 1;
  bool record_timing = false;        ///< wall_time_ms is 0 unless set, keeping the CSV reproducible
  SolverOptions solver;

  /// Sorts m_values ascending and fills default labels; throws on invalid plans.
  void validate();
};

/// Parses the JSON plan document; unknown keys and other schema versions are rejected.
ExperimentPlan parse_plan(const std::string& text);
ExperimentPlan load_plan(const std::filesystem::path& file);
std::string plan_to_json(const ExperimentPlan& plan);

struct MetricRow {
  Index m = 0;
  int trial = 0;
  std::string method;
  double hyper = 0.0;
  double rmse = 0.0;
  double mse = 0.0;
  double wall_time_ms = 0.0;
  std::uint64_t seed = 0;
  std::string status = "ok";

  bool ok() const noexcept { return status == "ok"; }
};

bool same_row(const MetricRow& a, const MetricRow& b);  ///< NaN-aware equality

/// Noise seed of trial `trial` at node count m.
std::uint64_t trial_seed(std::uint64_t master_seed, Index m, int trial);

/// Everything about one node count that does not depend on the noise.
struct TrialContext {
  GraphTopology graph;
  LaplacianSpectrum spec;
  SystemEnsemble truth;
  double s_m = 0.0;                              ///< variation of truth on `graph`
  std::optional<GammaDiagnostics> gammas;        ///< empty when the Grammians overflow

  static TrialContext build(const ExperimentPlan& plan, Index m);
};

/// Resolves the grid entry's hyperparameter for this context.
EstimatorConfig resolve_config(const ExperimentPlan& plan, const MethodSpec& spec, const TrialContext& ctx);

/// Simulates one trial with the given noise seed and runs every grid entry.
/// Estimator failures are recorded in the row status instead of thrown.
std::vector<MetricRow> run_trial(const ExperimentPlan& plan, const TrialContext& ctx, int trial, std::uint64_t seed);

/// Runs every (m, trial). Rows reach `sink` and the returned vector in
/// canonical order (m ascending, trial ascending, grid order), whatever the
/// thread count.
std::vector<MetricRow> run_plan(const ExperimentPlan& plan,
                                const std::function<void(const MetricRow&)>& sink = {});

/// Re-runs a single trial from its recorded seed.
std::vector<MetricRow> replay(const ExperimentPlan& plan, Index m, int trial, std::uint64_t seed);

inline constexpr const char* kCsvHeader = "m,trial,method,hyper,rmse,mse,wall_time_ms,seed,status";

std::string format_csv_row(const MetricRow& row);
void write_csv(std::ostream& out, const std::vector<MetricRow>& rows);
std::string to_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_csv(const std::string& text);

struct SummaryRow {
  Index m = 0;
  std::string method;
  double mean_rmse = 0.0;
  double std_rmse = 0.0;   ///< sample standard deviation, 0 when n == 1
  Index n = 0;
};

/// Per (m, method) mean and sample standard deviation of the rmse over rows
/// with status "ok". Sorted by method (first appearance), then m.
std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows);

/// Writes one table per method, `<prefix>_<method>.csv` with
/// columns m,mean_rmse,std_rmse,n. Returns the files written.
std::vector<std::filesystem::path> write_plot_data(const std::vector<SummaryRow>& summary, const std::string& prefix);

}  // namespace netlds
