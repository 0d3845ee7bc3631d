#ifndef PETNET_GRAPH_HPP
#define PETNET_GRAPH_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace petnet {

// Row-major dense storage is used for node signals so that a (nodes x
// channels) block of one sample is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Node-by-subject signal matrix: one row per node, one column per subject.
struct SignalMatrix {
  Matrix values;
  std::vector<std::string> node_ids;
  std::vector<std::string> subject_ids;

  SignalMatrix() = default;
  /// Builds default ids ("n0".., "s0"..) and validates.
  explicit SignalMatrix(Matrix v);
  SignalMatrix(Matrix v, std::vector<std::string> nodes, std::vector<std::string> subjects);

  std::size_t n_nodes() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_subjects() const { return static_cast<std::size_t>(values.cols()); }

  /// Throws Dimension on id/shape mismatch and Validation on non-finite cells.
  void validate() const;

  /// Columns `cols` in the given order.
  SignalMatrix select_subjects(const std::vector<std::size_t>& cols) const;
};

struct CorrMatrix {
  Eigen::MatrixXd values;
  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
};

struct Edge {
  std::size_t src;
  std::size_t dst;
  double weight;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Weighted undirected graph. Edges are stored canonically with src < dst,
/// sorted lexicographically, no duplicates, finite nonzero weights.
class SparseGraph {
 public:
  SparseGraph() = default;
  explicit SparseGraph(std::size_t n, std::vector<Edge> edges = {},
                       std::vector<bool> fake = {});

  std::size_t size() const { return n_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  bool is_fake(std::size_t node) const { return !fake_.empty() && fake_[node]; }
  const std::vector<bool>& fake_flags() const { return fake_; }
  std::size_t fake_count() const;

  /// Weighted degree of every node.
  std::vector<double> degrees() const;
  /// Symmetric weighted adjacency.
  SparseMatrix adjacency() const;
  Eigen::MatrixXd dense_adjacency() const;
  double total_weight() const;

  friend bool operator==(const SparseGraph&, const SparseGraph&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<bool> fake_;
};

enum class LaplacianKind { Combinatorial, Normalized };

const char* to_string(LaplacianKind kind);
LaplacianKind parse_laplacian_kind(const std::string& s);

struct LaplacianOp {
  LaplacianKind kind = LaplacianKind::Normalized;
  SparseMatrix entries;
  std::optional<double> lambda_max;
  bool rescaled = false;

  std::size_t size() const { return static_cast<std::size_t>(entries.rows()); }
};

struct LambdaEstimate {
  double value = 0.0;
  bool converged = true;
  int iterations = 0;
};

/// Pearson correlation between rows. Zero-variance rows correlate 0 with
/// everything, including themselves.
CorrMatrix pearson_correlation(const SignalMatrix& signals);

/// Edge (i, j, c_ij) for every off-diagonal pair with c_ij > threshold
/// (strict, signed).
SparseGraph infer_graph(const CorrMatrix& corr, double threshold);

/// Combinatorial D - W or normalized I - D^-1/2 W D^-1/2. Isolated nodes get
/// all-zero rows in both kinds.
LaplacianOp laplacian(const SparseGraph& g, LaplacianKind kind);

/// Largest eigenvalue by power iteration on L - cI with c = 0.4 max_i L_ii.
LambdaEstimate estimate_lambda_max(const LaplacianOp& lap, double tol = 1e-6,
                                   int max_iter = 1000);

/// 2 L / lambda_max - I. lambda_max <= 1e-9 falls back to 2.
LaplacianOp rescale(const LaplacianOp& lap, double lambda_max);

/// Laplacian -> estimate -> inflate by `inflation` -> rescale.
LaplacianOp rescaled_laplacian(const SparseGraph& g, LaplacianKind kind,
                               double inflation = 1.01);

/// Unweighted hop distances from `source`; unreachable nodes get SIZE_MAX.
std::vector<std::size_t> hop_distances(const SparseGraph& g, std::size_t source);

}  // namespace petnet

#endif
