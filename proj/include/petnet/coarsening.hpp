#ifndef PETNET_COARSENING_HPP
#define PETNET_COARSENING_HPP

#include "petnet/graph.hpp"
#include "petnet/spectral.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace petnet {

struct Matching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> singletons;
};

/// Greedy normalized-cut matching. Nodes are visited in a shuffled order
/// drawn from `seed`; each unmatched node takes the unmatched neighbour that
/// maximizes w_ij (1/d_i + 1/d_j), lowest index on ties.
Matching heavy_edge_matching(const SparseGraph& g, std::uint64_t seed);
Matching heavy_edge_matching(const SparseGraph& g, std::span<const std::size_t> visit_order);

struct CoarseGraph {
  SparseGraph graph;
  /// parent[fine node] = coarse node.
  std::vector<std::size_t> parent;
};

/// Collapses every pair and singleton to one node. Coarse ids follow the
/// smallest member index of each cluster; intra-pair weight is dropped.
CoarseGraph coarsen_once(const SparseGraph& g, const Matching& m);

struct CoarseningHierarchy {
  /// Padded graphs in pooling order; levels[l + 1] has half the nodes of levels[l].
  std::vector<SparseGraph> levels;
  /// parent[l][i] is the index in levels[l + 1] of node i in levels[l].
  std::vector<std::vector<std::size_t>> parent;
  /// perm[p] is the original node placed at padded position p; values
  /// >= original_size mark fake nodes.
  std::vector<std::size_t> perm;
  std::vector<std::size_t> fake_counts;
  std::size_t original_size = 0;

  std::size_t depth() const { return levels.empty() ? 0 : levels.size() - 1; }
  std::size_t level_size(std::size_t l) const { return levels.at(l).size(); }
  /// Padded position of every original node.
  std::vector<std::size_t> inverse_perm() const;
};

CoarseningHierarchy build_hierarchy(const SparseGraph& g, int n_levels, std::uint64_t seed);

/// Reorders rows into the padded layout; fake rows are zero.
NodeSignal permute_signal(const NodeSignal& x, const CoarseningHierarchy& h);

/// Max over each contiguous group of `factor` rows, per column. If `argmax`
/// is given it receives, per output element (row-major), the source row.
NodeSignal pool(const NodeSignal& x, int factor, std::vector<Eigen::Index>* argmax = nullptr);

}  // namespace petnet

#endif
