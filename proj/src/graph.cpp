#include "petnet/graph.hpp"

#include "petnet/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace petnet {

namespace {

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index n) {
  std::vector<std::string> ids(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ids[i] = prefix + std::to_string(i);
  return ids;
}

}  // namespace

SignalMatrix::SignalMatrix(Matrix v)
    : values(std::move(v)),
      node_ids(numbered("n", values.rows())),
      subject_ids(numbered("s", values.cols())) {
  validate();
}

SignalMatrix::SignalMatrix(Matrix v, std::vector<std::string> nodes,
                           std::vector<std::string> subjects)
    : values(std::move(v)), node_ids(std::move(nodes)), subject_ids(std::move(subjects)) {
  validate();
}

void SignalMatrix::validate() const {
  require(node_ids.size() == n_nodes(), ErrorKind::Dimension,
          "signal matrix has " + std::to_string(n_nodes()) + " rows but " +
              std::to_string(node_ids.size()) + " node ids");
  require(subject_ids.size() == n_subjects(), ErrorKind::Dimension,
          "signal matrix has " + std::to_string(n_subjects()) + " columns but " +
              std::to_string(subject_ids.size()) + " subject ids");
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      if (!std::isfinite(values(r, c)))
        fail(ErrorKind::Validation, "non-finite signal at node " + std::to_string(r) +
                                        ", subject " + std::to_string(c));
}

SignalMatrix SignalMatrix::select_subjects(const std::vector<std::size_t>& cols) const {
  SignalMatrix out;
  out.values.resize(values.rows(), static_cast<Eigen::Index>(cols.size()));
  out.node_ids = node_ids;
  out.subject_ids.reserve(cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) {
    require(cols[k] < n_subjects(), ErrorKind::Dimension, "subject index out of range");
    out.values.col(static_cast<Eigen::Index>(k)) = values.col(static_cast<Eigen::Index>(cols[k]));
    out.subject_ids.push_back(subject_ids[cols[k]]);
  }
  return out;
}

SparseGraph::SparseGraph(std::size_t n, std::vector<Edge> edges, std::vector<bool> fake)
    : n_(n), edges_(std::move(edges)), fake_(std::move(fake)) {
  require(fake_.empty() || fake_.size() == n_, ErrorKind::Dimension,
          "fake flag count does not match node count");
  for (auto& e : edges_) {
    require(e.src != e.dst, ErrorKind::Validation,
            "self-loop on node " + std::to_string(e.src));
    if (e.src > e.dst) std::swap(e.src, e.dst);
    require(e.dst < n_, ErrorKind::Validation,
            "edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) +
                ") out of range for " + std::to_string(n_) + " nodes");
    require(std::isfinite(e.weight) && e.weight != 0.0, ErrorKind::Validation,
            "edge weights must be finite and nonzero");
    require(!is_fake(e.src) && !is_fake(e.dst), ErrorKind::Validation,
            "fake nodes cannot carry edges");
  }
  std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
  for (std::size_t k = 1; k < edges_.size(); ++k)
    require(edges_[k].src != edges_[k - 1].src || edges_[k].dst != edges_[k - 1].dst,
            ErrorKind::Validation,
            "duplicate edge (" + std::to_string(edges_[k].src) + ", " +
                std::to_string(edges_[k].dst) + ")");
  if (!fake_.empty() && std::none_of(fake_.begin(), fake_.end(), [](bool f) { return f; }))
    fake_.clear();
}

std::size_t SparseGraph::fake_count() const {
  return static_cast<std::size_t>(std::count(fake_.begin(), fake_.end(), true));
}

std::vector<double> SparseGraph::degrees() const {
  std::vector<double> d(n_, 0.0);
  for (const auto& e : edges_) {
    d[e.src] += e.weight;
    d[e.dst] += e.weight;
  }
  return d;
}

SparseMatrix SparseGraph::adjacency() const {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * edges_.size());
  for (const auto& e : edges_) {
    trips.emplace_back(e.src, e.dst, e.weight);
    trips.emplace_back(e.dst, e.src, e.weight);
  }
  SparseMatrix a(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

Eigen::MatrixXd SparseGraph::dense_adjacency() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_),
                                            static_cast<Eigen::Index>(n_));
  for (const auto& e : edges_) {
    a(e.src, e.dst) = e.weight;
    a(e.dst, e.src) = e.weight;
  }
  return a;
}

double SparseGraph::total_weight() const {
  double s = 0.0;
  for (const auto& e : edges_) s += e.weight;
  return s;
}

const char* to_string(LaplacianKind kind) {
  return kind == LaplacianKind::Combinatorial ? "combinatorial" : "normalized";
}

LaplacianKind parse_laplacian_kind(const std::string& s) {
  if (s == "combinatorial") return LaplacianKind::Combinatorial;
  if (s == "normalized") return LaplacianKind::Normalized;
  fail(ErrorKind::Config, "unknown laplacian kind '" + s + "'");
}

CorrMatrix pearson_correlation(const SignalMatrix& signals) {
  signals.validate();
  const Eigen::Index n = signals.values.rows();
  const Eigen::Index m = signals.values.cols();
  require(m >= 2, ErrorKind::Dimension,
          "correlation needs at least 2 subjects, got " + std::to_string(m));

  Eigen::MatrixXd z(n, m);
  std::vector<bool> constant(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = signals.values.row(i);
    const double mean = row.mean();
    z.row(i) = row.array() - mean;
    const double spread = z.row(i).norm();
    if (spread <= 1e-12 * row.norm() || spread == 0.0) {
      constant[i] = true;
      z.row(i).setZero();
    } else {
      z.row(i) /= spread;
    }
  }

  CorrMatrix out;
  out.values = z * z.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i, i) = constant[i] ? 0.0 : 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double c = std::clamp(out.values(i, j), -1.0, 1.0);
      out.values(i, j) = c;
      out.values(j, i) = c;
    }
  }
  return out;
}

SparseGraph infer_graph(const CorrMatrix& corr, double threshold) {
  require(threshold >= 0.0 && threshold <= 1.0, ErrorKind::Validation,
          "threshold must lie in [0, 1]");
  require(corr.values.rows() == corr.values.cols(), ErrorKind::Dimension,
          "correlation matrix must be square");
  const auto n = static_cast<std::size_t>(corr.values.rows());
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = corr.values(i, j);
      require(std::isfinite(c), ErrorKind::Validation, "non-finite correlation");
      if (c > threshold) edges.push_back({i, j, c});
    }
  }
  return SparseGraph(n, std::move(edges));
}

LaplacianOp laplacian(const SparseGraph& g, LaplacianKind kind) {
  const auto n = static_cast<Eigen::Index>(g.size());
  const auto deg = g.degrees();
  std::vector<bool> isolated(g.size(), true);
  for (const auto& e : g.edges()) isolated[e.src] = isolated[e.dst] = false;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * g.edge_count() + g.size());
  if (kind == LaplacianKind::Combinatorial) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!isolated[i]) trips.emplace_back(i, i, deg[i]);
    for (const auto& e : g.edges()) {
      trips.emplace_back(e.src, e.dst, -e.weight);
      trips.emplace_back(e.dst, e.src, -e.weight);
    }
  } else {
    std::vector<double> inv_sqrt(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (isolated[i]) continue;
      require(deg[i] > 0.0, ErrorKind::Domain,
              "normalized laplacian needs positive degree, node " + std::to_string(i) +
                  " has " + std::to_string(deg[i]));
      inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);
      trips.emplace_back(i, i, 1.0);
    }
    for (const auto& e : g.edges()) {
      const double v = -e.weight * inv_sqrt[e.src] * inv_sqrt[e.dst];
      trips.emplace_back(e.src, e.dst, v);
      trips.emplace_back(e.dst, e.src, v);
    }
  }

  LaplacianOp op;
  op.kind = kind;
  op.entries.resize(n, n);
  op.entries.setFromTriplets(trips.begin(), trips.end());
  op.entries.makeCompressed();
  return op;
}

LambdaEstimate estimate_lambda_max(const LaplacianOp& lap, double tol, int max_iter) {
  require(!lap.rescaled, ErrorKind::Contract, "lambda_max requires an unrescaled laplacian");
  const SparseMatrix& a = lap.entries;
  const Eigen::Index n = a.rows();

  bool all_zero = true;
  for (Eigen::Index k = 0; k < a.nonZeros() && all_zero; ++k)
    all_zero = a.valuePtr()[k] == 0.0;
  if (n == 0 || all_zero) return {0.0, true, 0};

  // lambda_max >= max_i L_ii (Rayleigh quotient at e_i), strictly when node i
  // has an edge, and lambda_min >= 0. Iterating on L - cI with c = 0.4 max_i L_ii
  // keeps lambda_max dominant and shrinks the ratio to the runner-up.
  double max_diag = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) max_diag = std::max(max_diag, a.coeff(i, i));
  const double shift = -0.4 * max_diag;

  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v[i] = 1.0 + 0.01 * static_cast<double>((i * 7919) % 101) / 101.0;
  v.normalize();

  // Stops on a small eigen-residual, or once the Rayleigh quotient has
  // stalled far below tol. Near-degenerate top pairs (disconnected graphs)
  // never shrink the residual but pin the value quickly.
  LambdaEstimate est;
  est.converged = false;
  Eigen::VectorXd w(n);
  double previous = std::numeric_limits<double>::quiet_NaN();
  int stalled = 0;
  for (int it = 1; it <= max_iter; ++it) {
    w.noalias() = a * v;
    w += shift * v;
    const double mu = v.dot(w);
    est.value = mu - shift;
    est.iterations = it;
    const double residual = (w - mu * v).norm();
    const double scale = std::max(std::abs(est.value), 1e-300);
    stalled = std::abs(est.value - previous) <= 1e-3 * tol * scale ? stalled + 1 : 0;
    previous = est.value;
    if (residual <= tol * scale || stalled >= 10) {
      est.converged = true;
      break;
    }
    const double len = w.norm();
    if (len == 0.0) break;
    v = w / len;
  }
  return est;
}

LaplacianOp rescale(const LaplacianOp& lap, double lambda_max) {
  require(!lap.rescaled, ErrorKind::Contract, "laplacian is already rescaled");
  const double lam = lambda_max <= 1e-9 ? 2.0 : lambda_max;
  const auto n = lap.entries.rows();
  SparseMatrix eye(n, n);
  eye.setIdentity();

  LaplacianOp out;
  out.kind = lap.kind;
  out.entries = (2.0 / lam) * lap.entries - eye;
  out.entries.makeCompressed();
  out.lambda_max = lam;
  out.rescaled = true;
  return out;
}

LaplacianOp rescaled_laplacian(const SparseGraph& g, LaplacianKind kind, double inflation) {
  auto lap = laplacian(g, kind);
  const auto est = estimate_lambda_max(lap);
  return rescale(lap, est.value * inflation);
}

std::vector<std::size_t> hop_distances(const SparseGraph& g, std::size_t source) {
  const auto unreached = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<std::size_t>> nbrs(g.size());
  for (const auto& e : g.edges()) {
    nbrs[e.src].push_back(e.dst);
    nbrs[e.dst].push_back(e.src);
  }
  std::vector<std::size_t> dist(g.size(), unreached);
  std::deque<std::size_t> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : nbrs[u])
      if (dist[v] == unreached) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
  }
  return dist;
}

}  // namespace petnet
