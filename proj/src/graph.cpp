#include "netlds/graph.hpp"

#include "netlds/ensemble.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace netlds {

std::string_view to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::Path: return "path";
    case GraphKind::Complete: return "complete";
    case GraphKind::Star: return "star";
    case GraphKind::Custom: return "custom";
  }
  return "custom";
}

GraphKind graph_kind_from_string(std::string_view name) {
  if (name == "path") return GraphKind::Path;
  if (name == "complete") return GraphKind::Complete;
  if (name == "star") return GraphKind::Star;
  if (name == "custom") return GraphKind::Custom;
  throw std::invalid_argument("unknown graph kind '" + std::string(name) + "'");
}

namespace {

void require_nodes(Index m) {
  if (m < 2) throw std::invalid_argument("graph needs at least 2 nodes, got " + std::to_string(m));
}

bool is_connected(Index m, const std::vector<std::vector<Index>>& adjacency) {
  std::vector<char> seen(static_cast<std::size_t>(m), 0);
  std::vector<Index> stack{0};
  seen[0] = 1;
  Index visited = 1;
  while (!stack.empty()) {
    const Index u = stack.back();
    stack.pop_back();
    for (Index v : adjacency[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++visited;
        stack.push_back(v);
      }
    }
  }
  return visited == m;
}

}  // namespace

GraphTopology::GraphTopology(Index m, GraphKind kind, std::vector<std::pair<Index, Index>> edges)
    : m_(m), kind_(kind), edges_(std::move(edges)), adjacency_(static_cast<std::size_t>(m)) {
  require_nodes(m);
  for (auto& [i, j] : edges_) {
    if (i == j) throw std::invalid_argument("self-loop at node " + std::to_string(i + 1));
    if (i < 0 || j < 0 || i >= m || j >= m) {
      throw std::invalid_argument("edge {" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                  "} out of range for m=" + std::to_string(m));
    }
    if (i > j) std::swap(i, j);
  }
  std::sort(edges_.begin(), edges_.end());
  if (auto dup = std::adjacent_find(edges_.begin(), edges_.end()); dup != edges_.end()) {
    throw std::invalid_argument("duplicate edge {" + std::to_string(dup->first + 1) + "," +
                                std::to_string(dup->second + 1) + "}");
  }
  for (const auto& [i, j] : edges_) {
    adjacency_[i].push_back(j);
    adjacency_[j].push_back(i);
  }
  for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
  if (!is_connected(m_, adjacency_)) throw std::invalid_argument("graph is not connected");
}

GraphTopology GraphTopology::path(Index m) {
  require_nodes(m);
  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 0; i + 1 < m; ++i) edges.emplace_back(i, i + 1);
  return GraphTopology(m, GraphKind::Path, std::move(edges));
}

GraphTopology GraphTopology::complete(Index m) {
  require_nodes(m);
  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 0; i < m; ++i)
    for (Index j = i + 1; j < m; ++j) edges.emplace_back(i, j);
  return GraphTopology(m, GraphKind::Complete, std::move(edges));
}

GraphTopology GraphTopology::star(Index m) {
  require_nodes(m);
  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 1; i < m; ++i) edges.emplace_back(0, i);
  return GraphTopology(m, GraphKind::Star, std::move(edges));
}

GraphTopology GraphTopology::custom(Index m, const std::vector<std::pair<Index, Index>>& edges_one_based) {
  std::vector<std::pair<Index, Index>> edges;
  edges.reserve(edges_one_based.size());
  for (const auto& [a, b] : edges_one_based) edges.emplace_back(a - 1, b - 1);
  return GraphTopology(m, GraphKind::Custom, std::move(edges));
}

GraphTopology GraphTopology::make(GraphKind kind, Index m) {
  switch (kind) {
    case GraphKind::Path: return path(m);
    case GraphKind::Complete: return complete(m);
    case GraphKind::Star: return star(m);
    case GraphKind::Custom: break;
  }
  throw std::invalid_argument("custom graphs need an explicit edge list");
}

GraphTopology GraphTopology::parse_edge_list(std::string_view text) {
  std::vector<std::pair<Index, Index>> edges;
  Index m = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    long long a = 0;
    long long b = 0;
    if (!(fields >> a)) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw std::invalid_argument("edge list line " + std::to_string(line_no) + ": expected two node ids");
      continue;
    }
    std::string extra;
    if (!(fields >> b) || (fields >> extra)) {
      throw std::invalid_argument("edge list line " + std::to_string(line_no) + ": expected two node ids");
    }
    if (a < 1 || b < 1) {
      throw std::invalid_argument("edge list line " + std::to_string(line_no) + ": node ids are 1-based");
    }
    edges.emplace_back(a, b);
    m = std::max<Index>(m, std::max<Index>(a, b));
  }
  return custom(m, edges);
}

GraphTopology GraphTopology::load_edge_list(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open edge list " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_edge_list(buffer.str());
}

std::string GraphTopology::to_edge_list() const {
  std::ostringstream out;
  out << "# " << to_string(kind_) << " graph, m=" << m_ << "\n";
  for (const auto& [i, j] : edges_) out << (i + 1) << ' ' << (j + 1) << '\n';
  return out.str();
}

Matrix LaplacianSpectrum::low_frequency_basis(Index tau) const {
  const Index m = size();
  if (tau < 1 || tau > m) throw std::invalid_argument("tau must lie in [1, m]");
  Matrix basis(m, tau);
  for (Index k = 0; k < tau; ++k) basis.col(k) = eigenvectors.col(m - 1 - k);
  return basis;
}

bool LaplacianSpectrum::splits_eigenspace(Index tau, double tol) const {
  const Index m = size();
  if (tau >= m) return false;
  // kept: indices m-tau .. m-1; first dropped: m-tau-1
  const double scale = std::max(1.0, eigenvalues.cwiseAbs().maxCoeff());
  return std::abs(eigenvalues(m - tau) - eigenvalues(m - tau - 1)) <= tol * scale;
}

Matrix build_laplacian(const GraphTopology& g) {
  const Index m = g.nodes();
  Matrix lap = Matrix::Zero(m, m);
  for (const auto& [i, j] : g.edges()) {
    lap(i, j) -= 1.0;
    lap(j, i) -= 1.0;
    lap(i, i) += 1.0;
    lap(j, j) += 1.0;
  }
  return lap;
}

namespace {

void normalise_sign(Eigen::Ref<Vector> v) {
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12) {
      if (v(i) < 0) v = -v;
      return;
    }
  }
}

}  // namespace

LaplacianSpectrum spectrum(const Matrix& laplacian) {
  if (laplacian.rows() != laplacian.cols() || laplacian.rows() == 0)
    throw std::invalid_argument("Laplacian must be a nonempty square matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(laplacian);
  if (solver.info() != Eigen::Success) throw Error("symmetric eigensolver did not converge");

  const Index m = laplacian.rows();
  LaplacianSpectrum out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  for (Index i = 0; i < m; ++i) normalise_sign(out.eigenvectors.col(i));

  const double tol = 1e-9 * std::max(1.0, out.eigenvalues.cwiseAbs().maxCoeff());
  Index start = 0;
  while (start < m) {
    Index stop = start + 1;
    while (stop < m && std::abs(out.eigenvalues(stop) - out.eigenvalues(start)) <= tol) ++stop;
    if (stop - start > 1) {
      std::vector<Vector> block;
      for (Index i = start; i < stop; ++i) block.emplace_back(out.eigenvectors.col(i));
      std::sort(block.begin(), block.end(), [](const Vector& a, const Vector& b) {
        return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
      });
      for (Index i = start; i < stop; ++i) out.eigenvectors.col(i) = block[static_cast<std::size_t>(i - start)];
    }
    start = stop;
  }
  return out;
}

Vector closed_form_eigenvalues(GraphKind kind, Index m) {
  require_nodes(m);
  Vector ev(m);
  switch (kind) {
    case GraphKind::Path:
      for (Index l = 1; l <= m; ++l) {
        const double s = std::sin(std::numbers::pi * static_cast<double>(m - l) / (2.0 * static_cast<double>(m)));
        ev(l - 1) = 4.0 * s * s;
      }
      break;
    case GraphKind::Complete:
      ev.setConstant(static_cast<double>(m));
      break;
    case GraphKind::Star:
      ev.setOnes();
      ev(0) = static_cast<double>(m);
      break;
    case GraphKind::Custom:
      throw std::invalid_argument("no closed-form spectrum for custom graphs");
  }
  ev(m - 1) = 0.0;
  return ev;
}

LaplacianSpectrum closed_form_spectrum(GraphKind kind, Index m) {
  Vector ev = closed_form_eigenvalues(kind, m);
  if (kind != GraphKind::Path) {
    LaplacianSpectrum numeric = spectrum(build_laplacian(GraphTopology::make(kind, m)));
    return {std::move(ev), std::move(numeric.eigenvectors)};
  }
  const double md = static_cast<double>(m);
  Matrix vecs(m, m);
  vecs.col(m - 1).setConstant(1.0 / std::sqrt(md));
  for (Index i = 1; i < m; ++i) {
    for (Index l = 1; l <= m; ++l) {
      vecs(l - 1, m - 1 - i) = std::sqrt(2.0 / md) *
                               std::cos(static_cast<double>(2 * l - 1) * std::numbers::pi * static_cast<double>(i) / (2.0 * md));
    }
  }
  return {std::move(ev), std::move(vecs)};
}

double quadratic_variation(const std::vector<Matrix>& mats, const GraphTopology& g) {
  if (static_cast<Index>(mats.size()) != g.nodes())
    throw std::invalid_argument("ensemble has " + std::to_string(mats.size()) + " matrices but graph has " +
                                std::to_string(g.nodes()) + " nodes");
  double total = 0.0;
  for (const auto& [i, j] : g.edges()) total += (mats[static_cast<std::size_t>(i)] - mats[static_cast<std::size_t>(j)]).squaredNorm();
  return total;
}

double quadratic_variation(const SystemEnsemble& ensemble, const GraphTopology& g) {
  return quadratic_variation(ensemble.mats(), g);
}

double delocalization_theta(const LaplacianSpectrum& spec) {
  const Index m = spec.size();
  const double md = static_cast<double>(m);
  double theta = 0.0;
  for (Index l = 0; l < m; ++l) {
    double prefix = 0.0;
    for (Index tau = 1; tau <= m; ++tau) {
      const double v = spec.eigenvectors(l, m - tau);
      prefix += v * v;
      theta = std::max(theta, md / static_cast<double>(tau) * prefix);
    }
  }
  return theta;
}

}  // namespace netlds
