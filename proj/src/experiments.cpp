#include "netlds/experiments.hpp"

#include "netlds/io.hpp"
#include "netlds/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace netlds {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw std::invalid_argument("plan: unknown key '" + key + "' in " + where);
  }
}

MethodSpec parse_method(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("plan: every methods entry must be an object");
  reject_unknown_keys(j, {"method", "label", "lambda", "lambda_rule", "tau", "tau_rule", "c_prime", "rank_tol"},
                      "methods entry");
  MethodSpec spec;
  spec.method = method_from_string(j.at("method").get<std::string>());
  spec.label = j.value("label", "");
  if (j.contains("lambda")) spec.lambda = j.at("lambda").get<double>();
  if (j.contains("lambda_rule")) spec.lambda_rule = lambda_rule_from_string(j.at("lambda_rule").get<std::string>());
  if (j.contains("tau")) spec.tau = j.at("tau").get<Index>();
  if (j.contains("tau_rule")) spec.tau_rule = tau_rule_from_string(j.at("tau_rule").get<std::string>());
  spec.c_prime = j.value("c_prime", 1.0);
  spec.rank_tol = j.value("rank_tol", -1.0);
  return spec;
}

json method_to_json(const MethodSpec& spec) {
  json j;
  j["method"] = std::string(to_string(spec.method));
  j["label"] = spec.label;
  if (spec.lambda) j["lambda"] = *spec.lambda;
  if (spec.lambda_rule) j["lambda_rule"] = std::string(to_string(*spec.lambda_rule));
  if (spec.tau) j["tau"] = *spec.tau;
  if (spec.tau_rule) j["tau_rule"] = std::string(to_string(*spec.tau_rule));
  if (spec.c_prime != 1.0) j["c_prime"] = spec.c_prime;
  if (spec.rank_tol >= 0.0) j["rank_tol"] = spec.rank_tol;
  return j;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string sanitize_status(std::string s) {
  for (char& c : s) {
    if (c == ',' ) c = ';';
    if (c == '\n' || c == '\r' || c == '"') c = ' ';
  }
  return s;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, int line) {
  if (s == "nan") return kNaN;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw std::invalid_argument("csv line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

template <class Int>
Int parse_integer(const std::string& s, int line) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size())
    throw std::invalid_argument("csv line " + std::to_string(line) + ": bad integer '" + s + "'");
  return static_cast<Int>(v);
}

bool same_double(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

}  // namespace

void ExperimentPlan::validate() {
  if (d < 1) throw std::invalid_argument("plan: d must be at least 1");
  if (m_values.empty()) throw std::invalid_argument("plan: m_values must be nonempty");
  for (Index m : m_values)
    if (m < 2) throw std::invalid_argument("plan: every m must be at least 2");
  std::sort(m_values.begin(), m_values.end());
  if (std::adjacent_find(m_values.begin(), m_values.end()) != m_values.end())
    throw std::invalid_argument("plan: m_values contains duplicates");
  if (horizon < 1) throw std::invalid_argument("plan: T must be at least 1");
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("plan: beta must lie in (0, 1]");
  if (trials < 1) throw std::invalid_argument("plan: trials must be at least 1");
  if (threads < 1) throw std::invalid_argument("plan: threads must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("plan: delta must lie in (0, 1)");
  if (graph == GraphKind::Custom) throw std::invalid_argument("plan: graph must be path, complete or star");
  if (methods.empty()) throw std::invalid_argument("plan: methods must be nonempty");
  std::set<std::string> labels;
  for (auto& spec : methods) {
    if (spec.label.empty()) spec.label = std::string(to_string(spec.method));
    if (spec.label.find_first_of(",\n\r\"") != std::string::npos)
      throw std::invalid_argument("plan: method label '" + spec.label + "' must not contain commas or quotes");
    if (!labels.insert(spec.label).second)
      throw std::invalid_argument("plan: duplicate method label '" + spec.label + "'; set distinct labels");
    const bool has_lambda = spec.lambda || spec.lambda_rule;
    const bool has_tau = spec.tau || spec.tau_rule;
    switch (spec.method) {
      case Method::LaplacianSmoothing:
        if (spec.lambda.has_value() == spec.lambda_rule.has_value())
          throw std::invalid_argument("plan: " + spec.label + " needs exactly one of lambda, lambda_rule");
        if (spec.lambda && !(*spec.lambda >= 0.0)) throw std::invalid_argument("plan: lambda must be >= 0");
        if (has_tau) throw std::invalid_argument("plan: " + spec.label + " does not take tau");
        break;
      case Method::SubspaceLS:
        if (spec.tau.has_value() == spec.tau_rule.has_value())
          throw std::invalid_argument("plan: " + spec.label + " needs exactly one of tau, tau_rule");
        if (spec.tau && *spec.tau < 1) throw std::invalid_argument("plan: tau must be at least 1");
        if (has_lambda) throw std::invalid_argument("plan: " + spec.label + " does not take lambda");
        break;
      case Method::NodewiseOLS:
      case Method::PooledOLS:
        if (has_lambda || has_tau) throw std::invalid_argument("plan: " + spec.label + " takes no hyperparameter");
        break;
    }
  }
}

ExperimentPlan parse_plan(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("plan: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("plan: top level must be an object");
  reject_unknown_keys(doc,
                      {"schema_version", "graph", "d", "m_values", "T", "beta", "noise", "r", "trials", "methods",
                       "seed", "output", "normalize", "delta", "threads", "record_timing", "solver"},
                      "plan");
  if (!doc.contains("schema_version") || doc.at("schema_version").get<int>() != ExperimentPlan::kSchemaVersion)
    throw std::invalid_argument("plan: schema_version must be " + std::to_string(ExperimentPlan::kSchemaVersion));

  ExperimentPlan plan;
  try {
    plan.graph = graph_kind_from_string(doc.value("graph", "path"));
    plan.d = doc.value("d", plan.d);
    plan.m_values = doc.at("m_values").get<std::vector<Index>>();
    plan.horizon = doc.value("T", plan.horizon);
    plan.beta = doc.value("beta", plan.beta);
    plan.noise.kind = noise_kind_from_string(doc.value("noise", "gaussian"));
    plan.noise.r = doc.value("r", 1.0);
    plan.trials = doc.value("trials", plan.trials);
    plan.master_seed = doc.value("seed", std::uint64_t{0});
    plan.output = doc.value("output", "");
    plan.normalize = doc.value("normalize", true);
    plan.delta = doc.value("delta", plan.delta);
    plan.threads = doc.value("threads", 1);
    plan.record_timing = doc.value("record_timing", false);
    if (doc.contains("solver")) {
      const auto& s = doc.at("solver");
      reject_unknown_keys(s, {"tol", "max_iter", "dense_max_unknowns", "block_jacobi", "singular_tol"}, "solver");
      plan.solver.tol = s.value("tol", plan.solver.tol);
      plan.solver.max_iter = s.value("max_iter", plan.solver.max_iter);
      plan.solver.dense_max_unknowns = s.value("dense_max_unknowns", plan.solver.dense_max_unknowns);
      plan.solver.block_jacobi = s.value("block_jacobi", plan.solver.block_jacobi);
      plan.solver.singular_tol = s.value("singular_tol", plan.solver.singular_tol);
    }
    for (const auto& entry : doc.at("methods")) plan.methods.push_back(parse_method(entry));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("plan: ") + e.what());
  }
  plan.validate();
  return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& file) { return parse_plan(io::read_file(file)); }

std::string plan_to_json(const ExperimentPlan& plan) {
  json doc;
  doc["schema_version"] = ExperimentPlan::kSchemaVersion;
  doc["graph"] = std::string(to_string(plan.graph));
  doc["d"] = plan.d;
  doc["m_values"] = plan.m_values;
  doc["T"] = plan.horizon;
  doc["beta"] = plan.beta;
  doc["noise"] = std::string(to_string(plan.noise.kind));
  doc["r"] = plan.noise.r;
  doc["trials"] = plan.trials;
  doc["seed"] = plan.master_seed;
  if (!plan.output.empty()) doc["output"] = plan.output;
  doc["normalize"] = plan.normalize;
  doc["delta"] = plan.delta;
  doc["threads"] = plan.threads;
  doc["record_timing"] = plan.record_timing;
  doc["solver"] = {{"tol", plan.solver.tol},
                   {"max_iter", plan.solver.max_iter},
                   {"dense_max_unknowns", plan.solver.dense_max_unknowns},
                   {"block_jacobi", plan.solver.block_jacobi},
                   {"singular_tol", plan.solver.singular_tol}};
  json methods = json::array();
  for (const auto& spec : plan.methods) methods.push_back(method_to_json(spec));
  doc["methods"] = std::move(methods);
  return doc.dump(2);
}

bool same_row(const MetricRow& a, const MetricRow& b) {
  return a.m == b.m && a.trial == b.trial && a.method == b.method && same_double(a.hyper, b.hyper) &&
         same_double(a.rmse, b.rmse) && same_double(a.mse, b.mse) && same_double(a.wall_time_ms, b.wall_time_ms) &&
         a.seed == b.seed && a.status == b.status;
}

std::uint64_t trial_seed(std::uint64_t master_seed, Index m, int trial) {
  return mix(mix(master_seed) ^ mix(static_cast<std::uint64_t>(m) << 32 ^ static_cast<std::uint64_t>(trial)));
}

TrialContext TrialContext::build(const ExperimentPlan& plan, Index m) {
  GraphTopology graph = GraphTopology::make(plan.graph, m);
  LaplacianSpectrum spec = spectrum(build_laplacian(graph));
  SystemEnsemble truth = sample_holder_ensemble(m, plan.d, plan.beta);
  if (plan.normalize) truth = normalize_spectral_radius(truth);
  const double s_m = quadratic_variation(truth, graph);
  std::optional<GammaDiagnostics> gammas;
  try {
    gammas = gamma_diagnostics(truth, plan.horizon, plan.delta, plan.noise.r);
  } catch (const OverflowError&) {
  }
  return TrialContext{std::move(graph), std::move(spec), std::move(truth), s_m, gammas};
}

EstimatorConfig resolve_config(const ExperimentPlan& plan, const MethodSpec& spec, const TrialContext& ctx) {
  EstimatorConfig config;
  config.method = spec.method;
  config.solver = plan.solver;
  config.rank_tol = spec.rank_tol;
  const auto m = static_cast<double>(ctx.graph.nodes());
  if (spec.method == Method::LaplacianSmoothing) {
    if (spec.lambda) {
      config.lambda = *spec.lambda;
    } else {
      LambdaRuleParams p;
      p.r = plan.noise.r;
      p.d = static_cast<double>(plan.d);
      p.m = m;
      p.horizon = static_cast<double>(plan.horizon);
      p.s_m = ctx.s_m;
      p.beta = plan.beta;
      if (*spec.lambda_rule == LambdaRule::StarBalance) p.p1 = star_p1(ctx.truth, ctx.spec);
      config.lambda = lambda_rule(*spec.lambda_rule, p);
    }
  } else if (spec.method == Method::SubspaceLS) {
    if (spec.tau) {
      config.tau = *spec.tau;
    } else {
      TauRuleParams p;
      p.r = plan.noise.r;
      p.d = static_cast<double>(plan.d);
      p.m = m;
      p.horizon = static_cast<double>(plan.horizon);
      p.s_m = ctx.s_m;
      p.delta = plan.delta;
      p.c_prime = spec.c_prime;
      if (*spec.tau_rule == TauRule::PathBalance) {
        if (!ctx.gammas) throw OverflowError("gamma2 overflowed; the path tau rule is unavailable");
        p.gamma2 = ctx.gammas->gamma2;
      }
      config.tau = tau_rule(*spec.tau_rule, p);
    }
  }
  config.validate(ctx.graph.nodes());
  return config;
}

std::vector<MetricRow> run_trial(const ExperimentPlan& plan, const TrialContext& ctx, int trial, std::uint64_t seed) {
  const TrajectoryBundle bundle = simulate(ctx.truth, plan.horizon, plan.noise, seed);
  std::vector<MetricRow> rows;
  rows.reserve(plan.methods.size());
  for (const auto& spec : plan.methods) {
    MetricRow row;
    row.m = ctx.graph.nodes();
    row.trial = trial;
    row.method = spec.label.empty() ? std::string(to_string(spec.method)) : spec.label;
    row.seed = seed;
    row.hyper = kNaN;
    try {
      const EstimatorConfig config = resolve_config(plan, spec, ctx);
      row.hyper = spec.method == Method::LaplacianSmoothing ? config.lambda
                  : spec.method == Method::SubspaceLS       ? static_cast<double>(config.tau)
                                                            : 0.0;
      const auto start = std::chrono::steady_clock::now();
      const EstimateSet est = estimate(bundle, ctx.graph, ctx.spec, config);
      const auto stop = std::chrono::steady_clock::now();
      row.mse = mse(est.mats, ctx.truth.mats());
      row.rmse = std::sqrt(row.mse);
      if (plan.record_timing) row.wall_time_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    } catch (const std::exception& e) {
      row.rmse = kNaN;
      row.mse = kNaN;
      row.status = sanitize_status(std::string("error: ") + e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<MetricRow> run_plan(const ExperimentPlan& plan_in, const std::function<void(const MetricRow&)>& sink) {
  ExperimentPlan plan = plan_in;
  plan.validate();

  std::vector<TrialContext> contexts;
  contexts.reserve(plan.m_values.size());
  for (Index m : plan.m_values) contexts.push_back(TrialContext::build(plan, m));

  struct Job {
    std::size_t context;
    int trial;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < contexts.size(); ++c)
    for (int t = 1; t <= plan.trials; ++t) jobs.push_back({c, t});

  std::vector<std::vector<MetricRow>> results(jobs.size());
  std::vector<char> done(jobs.size(), 0);
  std::mutex emit_mutex;
  std::size_t next_to_emit = 0;
  std::vector<MetricRow> ordered;
  ordered.reserve(jobs.size() * plan.methods.size());

  auto finish = [&](std::size_t j) {
    std::lock_guard lock(emit_mutex);
    done[j] = 1;
    while (next_to_emit < jobs.size() && done[next_to_emit]) {
      for (auto& row : results[next_to_emit]) {
        if (sink) sink(row);
        ordered.push_back(std::move(row));
      }
      results[next_to_emit].clear();
      ++next_to_emit;
    }
  };
  auto run_job = [&](std::size_t j) {
    const auto& ctx = contexts[jobs[j].context];
    const int trial = jobs[j].trial;
    results[j] = run_trial(plan, ctx, trial, trial_seed(plan.master_seed, ctx.graph.nodes(), trial));
    finish(j);
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(plan.threads), jobs.size());
  if (workers <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j);
    return ordered;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1)) run_job(j);
      } catch (...) {
        failures[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  return ordered;
}

std::vector<MetricRow> replay(const ExperimentPlan& plan_in, Index m, int trial, std::uint64_t seed) {
  ExperimentPlan plan = plan_in;
  plan.validate();
  return run_trial(plan, TrialContext::build(plan, m), trial, seed);
}

std::string format_csv_row(const MetricRow& row) {
  std::string out;
  out += std::to_string(row.m);
  out += ',';
  out += std::to_string(row.trial);
  out += ',';
  out += row.method;
  out += ',';
  out += format_double(row.hyper);
  out += ',';
  out += format_double(row.rmse);
  out += ',';
  out += format_double(row.mse);
  out += ',';
  out += format_double(row.wall_time_ms);
  out += ',';
  out += std::to_string(row.seed);
  out += ',';
  out += sanitize_status(row.status);
  return out;
}

void write_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& row : rows) out << format_csv_row(row) << '\n';
}

std::string to_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  write_csv(out, rows);
  return out.str();
}

std::vector<MetricRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw std::invalid_argument("csv: unexpected header '" + line + "'");
  std::vector<MetricRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (fields.size() < 8) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) throw std::invalid_argument("csv line " + std::to_string(line_no) + ": too few fields");
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    fields.push_back(line.substr(start));
    MetricRow row;
    row.m = parse_integer<Index>(fields[0], line_no);
    row.trial = parse_integer<int>(fields[1], line_no);
    row.method = fields[2];
    row.hyper = parse_double(fields[3], line_no);
    row.rmse = parse_double(fields[4], line_no);
    row.mse = parse_double(fields[5], line_no);
    row.wall_time_ms = parse_double(fields[6], line_no);
    row.seed = parse_integer<std::uint64_t>(fields[7], line_no);
    row.status = fields[8];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("summarize needs at least one row");
  struct Running {
    Index n = 0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::vector<std::string> method_order;
  std::map<std::string, std::map<Index, Running>> groups;
  for (const auto& row : rows) {
    if (!groups.count(row.method)) method_order.push_back(row.method);
    auto& g = groups[row.method][row.m];
    if (!row.ok() || !std::isfinite(row.rmse)) continue;
    ++g.n;
    const double delta = row.rmse - g.mean;
    g.mean += delta / static_cast<double>(g.n);
    g.m2 += delta * (row.rmse - g.mean);
  }
  std::vector<SummaryRow> out;
  for (const auto& method : method_order) {
    for (const auto& [m, g] : groups[method]) {
      SummaryRow s;
      s.m = m;
      s.method = method;
      s.n = g.n;
      s.mean_rmse = g.n > 0 ? g.mean : kNaN;
      s.std_rmse = g.n > 1 ? std::sqrt(g.m2 / static_cast<double>(g.n - 1)) : 0.0;
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<std::filesystem::path> write_plot_data(const std::vector<SummaryRow>& summary, const std::string& prefix) {
  std::vector<std::filesystem::path> files;
  std::map<std::string, std::ostringstream> tables;
  std::vector<std::string> order;
  for (const auto& s : summary) {
    auto [it, inserted] = tables.try_emplace(s.method);
    if (inserted) {
      order.push_back(s.method);
      it->second << "m,mean_rmse,std_rmse,n\n";
    }
    it->second << s.m << ',' << format_double(s.mean_rmse) << ',' << format_double(s.std_rmse) << ',' << s.n << '\n';
  }
  for (const auto& method : order) {
    std::filesystem::path file = prefix + "_" + method + ".csv";
    io::write_file(file, tables[method].str());
    files.push_back(std::move(file));
  }
  return files;
}

}  // namespace netlds
