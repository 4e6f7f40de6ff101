#include "netlds/io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace netlds::io {

using nlohmann::json;

namespace {

json matrix_row_major(const Matrix& a) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(a.size()));
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) flat.push_back(a(i, j));
  return flat;
}

Matrix matrix_from_row_major(const json& j, Index rows, Index cols, const char* what) {
  const auto flat = j.get<std::vector<double>>();
  if (static_cast<Index>(flat.size()) != rows * cols)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(rows * cols) + " entries, got " +
                                std::to_string(flat.size()));
  Matrix a(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index k = 0; k < cols; ++k) a(i, k) = flat[static_cast<std::size_t>(i * cols + k)];
  return a;
}

json parse_container(const std::string& text, const char* format) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed ") + format + " file: " + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != format)
    throw std::invalid_argument(std::string("not a ") + format + " container");
  if (doc.value("version", -1) != kFormatVersion)
    throw std::invalid_argument(std::string(format) + ": unsupported version " + doc.value("version", json(-1)).dump());
  return doc;
}

std::vector<Matrix> read_mats(const json& arr, Index count, Index rows, Index cols, const char* what) {
  if (!arr.is_array() || static_cast<Index>(arr.size()) != count)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(count) + " matrices");
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(count));
  for (const auto& item : arr) out.push_back(matrix_from_row_major(item, rows, cols, what));
  return out;
}

}  // namespace

std::string ensemble_to_json(const SystemEnsemble& e) {
  json doc;
  doc["format"] = "netlds.ensemble";
  doc["version"] = kFormatVersion;
  doc["m"] = e.size();
  doc["d"] = e.dim();
  json meta;
  meta["normalized"] = e.meta().normalized;
  if (e.meta().beta) meta["beta"] = *e.meta().beta;
  if (e.meta().s_m) meta["s_m"] = *e.meta().s_m;
  doc["meta"] = meta;
  json mats = json::array();
  for (const auto& a : e.mats()) mats.push_back(matrix_row_major(a));
  doc["mats"] = std::move(mats);
  return doc.dump(1);
}

SystemEnsemble ensemble_from_json(const std::string& text) {
  const json doc = parse_container(text, "netlds.ensemble");
  const Index m = doc.at("m").get<Index>();
  const Index d = doc.at("d").get<Index>();
  if (m < 1 || d < 1) throw std::invalid_argument("netlds.ensemble: m and d must be positive");
  EnsembleMeta meta;
  if (doc.contains("meta")) {
    const auto& j = doc.at("meta");
    meta.normalized = j.value("normalized", false);
    if (j.contains("beta")) meta.beta = j.at("beta").get<double>();
    if (j.contains("s_m")) meta.s_m = j.at("s_m").get<double>();
  }
  return SystemEnsemble(read_mats(doc.at("mats"), m, d, d, "netlds.ensemble"), meta);
}

std::string bundle_to_json(const TrajectoryBundle& b, bool include_noise) {
  b.validate();
  json doc;
  doc["format"] = "netlds.trajectories";
  doc["version"] = kFormatVersion;
  doc["m"] = b.m;
  doc["d"] = b.d;
  doc["T"] = b.horizon;
  doc["seed"] = b.seed;
  json states = json::array();
  for (const auto& s : b.states) states.push_back(matrix_row_major(s));
  doc["states"] = std::move(states);
  if (include_noise && !b.noise.empty()) {
    json noise = json::array();
    for (const auto& s : b.noise) noise.push_back(matrix_row_major(s));
    doc["noise"] = std::move(noise);
  }
  return doc.dump(1);
}

TrajectoryBundle bundle_from_json(const std::string& text) {
  const json doc = parse_container(text, "netlds.trajectories");
  TrajectoryBundle b;
  b.m = doc.at("m").get<Index>();
  b.d = doc.at("d").get<Index>();
  b.horizon = doc.at("T").get<Index>();
  b.seed = doc.value("seed", std::uint64_t{0});
  if (b.m < 1 || b.d < 1 || b.horizon < 1) throw std::invalid_argument("netlds.trajectories: m, d, T must be positive");
  b.states = read_mats(doc.at("states"), b.m, b.d, b.horizon + 1, "netlds.trajectories states");
  if (doc.contains("noise")) b.noise = read_mats(doc.at("noise"), b.m, b.d, b.horizon + 1, "netlds.trajectories noise");
  b.validate();
  return b;
}

std::string estimates_to_json(const EstimateSet& est) {
  if (est.mats.empty()) throw std::invalid_argument("cannot serialise an empty estimate set");
  const auto& diag = est.diagnostics;
  json doc;
  doc["format"] = "netlds.estimates";
  doc["version"] = kFormatVersion;
  doc["m"] = est.mats.size();
  doc["d"] = est.mats.front().rows();
  json mats = json::array();
  for (const auto& a : est.mats) mats.push_back(matrix_row_major(a));
  doc["mats"] = std::move(mats);
  json j;
  j["method"] = std::string(to_string(diag.method));
  j["hyper"] = diag.hyper;
  j["fit_residual"] = diag.fit_residual;
  j["solver_residual"] = diag.solver_residual;
  j["solver_iters"] = diag.solver_iters;
  j["dense_solve"] = diag.dense_solve;
  j["basis_dependent"] = diag.basis_dependent;
  j["objective"] = diag.objective;
  if (diag.effective_rank) j["effective_rank"] = *diag.effective_rank;
  if (diag.objective_at_truth) j["objective_at_truth"] = *diag.objective_at_truth;
  if (diag.mse) j["mse"] = *diag.mse;
  if (diag.gammas) j["gammas"] = {{"gamma1", diag.gammas->gamma1}, {"gamma2", diag.gammas->gamma2}, {"gamma3", diag.gammas->gamma3}};
  doc["diagnostics"] = std::move(j);
  return doc.dump(1);
}

EstimateSet estimates_from_json(const std::string& text) {
  const json doc = parse_container(text, "netlds.estimates");
  const Index m = doc.at("m").get<Index>();
  const Index d = doc.at("d").get<Index>();
  EstimateSet est;
  est.mats = read_mats(doc.at("mats"), m, d, d, "netlds.estimates");
  const auto& j = doc.at("diagnostics");
  auto& diag = est.diagnostics;
  diag.method = method_from_string(j.at("method").get<std::string>());
  diag.hyper = j.value("hyper", 0.0);
  diag.fit_residual = j.value("fit_residual", 0.0);
  diag.solver_residual = j.value("solver_residual", 0.0);
  diag.solver_iters = j.value("solver_iters", 0);
  diag.dense_solve = j.value("dense_solve", false);
  diag.basis_dependent = j.value("basis_dependent", false);
  diag.objective = j.value("objective", 0.0);
  if (j.contains("effective_rank")) diag.effective_rank = j.at("effective_rank").get<Index>();
  if (j.contains("objective_at_truth")) diag.objective_at_truth = j.at("objective_at_truth").get<double>();
  if (j.contains("mse")) diag.mse = j.at("mse").get<double>();
  if (j.contains("gammas")) {
    const auto& g = j.at("gammas");
    diag.gammas = GammaDiagnostics{g.at("gamma1").get<double>(), g.at("gamma2").get<double>(), g.at("gamma3").get<double>()};
  }
  return est;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!content.empty() && content.back() != '\n') out << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace netlds::io
