#pragma once

#include "netlds/common.hpp"

#include <filesystem>
#include <optional>
#include <string_view>
#include <utility>

namespace netlds {

class SystemEnsemble;

enum class GraphKind { Path, Complete, Star, Custom };

std::string_view to_string(GraphKind kind);
GraphKind graph_kind_from_string(std::string_view name);

/// Connected, undirected, unweighted graph on m nodes.
///
/// Node ids are 1-based at the public boundary (constructors, edge-list
/// files) and 0-based everywhere else. Edges are stored as (i, j) with i < j,
/// sorted, so two graphs built from the same edge set compare equal.
class GraphTopology {
 public:
  static GraphTopology path(Index m);
  static GraphTopology complete(Index m);
  /// Hub is node 1; edges {1, i} for 2 <= i <= m.
  static GraphTopology star(Index m);
  /// Edges given as 1-based unordered pairs. Rejects self-loops, duplicates,
  /// out-of-range ids and disconnected graphs.
  static GraphTopology custom(Index m, const std::vector<std::pair<Index, Index>>& edges_one_based);
  static GraphTopology make(GraphKind kind, Index m);

  /// Whitespace-separated "l l'" per line, 1-based; '#' starts a comment.
  /// The node count is the largest id mentioned.
  static GraphTopology parse_edge_list(std::string_view text);
  static GraphTopology load_edge_list(const std::filesystem::path& file);
  std::string to_edge_list() const;

  Index nodes() const noexcept { return m_; }
  GraphKind kind() const noexcept { return kind_; }
  /// 0-based, i < j, sorted.
  const std::vector<std::pair<Index, Index>>& edges() const noexcept { return edges_; }
  /// 0-based neighbour lists, each sorted ascending.
  const std::vector<std::vector<Index>>& neighbors() const noexcept { return adjacency_; }
  Index degree(Index node) const { return static_cast<Index>(adjacency_.at(node).size()); }

  bool operator==(const GraphTopology& other) const {
    return m_ == other.m_ && edges_ == other.edges_;
  }

 private:
  GraphTopology(Index m, GraphKind kind, std::vector<std::pair<Index, Index>> edges);

  Index m_;
  GraphKind kind_;
  std::vector<std::pair<Index, Index>> edges_;
  std::vector<std::vector<Index>> adjacency_;
};

/// Eigenpairs of a graph Laplacian in descending order: eigenvalues(0) is the
/// largest, eigenvalues(m-1) == 0 with the constant eigenvector last.
/// Column i of `eigenvectors` pairs with eigenvalues(i).
struct LaplacianSpectrum {
  Vector eigenvalues;
  Matrix eigenvectors;

  Index size() const noexcept { return eigenvalues.size(); }
  /// The tau lowest-frequency eigenvectors ordered v_m, v_{m-1}, ..., v_{m-tau+1}.
  Matrix low_frequency_basis(Index tau) const;
  /// True when a basis of the tau lowest frequencies is not unique, i.e. the
  /// cut between v_{m-tau+1} and v_{m-tau} falls inside a repeated eigenvalue.
  bool splits_eigenspace(Index tau, double tol = 1e-9) const;
};

/// L = D - A.
Matrix build_laplacian(const GraphTopology& g);

/// Numerical eigendecomposition of a symmetric PSD matrix, reordered
/// descending. Each eigenvector is sign-normalised so that its first
/// coordinate with |x| > 1e-12 is positive; within a cluster of equal
/// eigenvalues the vectors are then sorted lexicographically (descending).
LaplacianSpectrum spectrum(const Matrix& laplacian);

/// Analytic eigenvalues for the three named families, descending.
Vector closed_form_eigenvalues(GraphKind kind, Index m);

/// Analytic spectrum. Path graphs get analytic eigenvectors as well; for
/// complete and star graphs the eigenvectors come from spectrum() of the
/// corresponding Laplacian since no closed form is used for them.
LaplacianSpectrum closed_form_spectrum(GraphKind kind, Index m);

/// Sum over edges of squared Frobenius differences between node matrices.
double quadratic_variation(const std::vector<Matrix>& mats, const GraphTopology& g);
double quadratic_variation(const SystemEnsemble& ensemble, const GraphTopology& g);

/// max over tau, l of (m / tau) * sum_{i <= tau} v_{m-i+1, l}^2.
double delocalization_theta(const LaplacianSpectrum& spec);

}  // namespace netlds
