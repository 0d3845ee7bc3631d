#include "petnet/coarsening.hpp"

#include "petnet/error.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

namespace petnet {

namespace {

constexpr std::size_t kUnset = static_cast<std::size_t>(-1);

std::vector<std::vector<std::pair<std::size_t, double>>> neighbours(const SparseGraph& g) {
  std::vector<std::vector<std::pair<std::size_t, double>>> nbrs(g.size());
  for (const auto& e : g.edges()) {
    nbrs[e.src].emplace_back(e.dst, e.weight);
    nbrs[e.dst].emplace_back(e.src, e.weight);
  }
  for (auto& list : nbrs) std::sort(list.begin(), list.end());
  return nbrs;
}

}  // namespace

Matching heavy_edge_matching(const SparseGraph& g, std::uint64_t seed) {
  std::vector<std::size_t> order(g.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return heavy_edge_matching(g, order);
}

Matching heavy_edge_matching(const SparseGraph& g, std::span<const std::size_t> visit_order) {
  require(visit_order.size() == g.size(), ErrorKind::Dimension,
          "visit order must list every node once");
  const auto nbrs = neighbours(g);
  const auto deg = g.degrees();
  std::vector<std::size_t> mate(g.size(), kUnset);
  std::vector<bool> seen(g.size(), false);

  Matching m;
  for (auto u : visit_order) {
    require(u < g.size() && !seen[u], ErrorKind::Validation, "visit order is not a permutation");
    seen[u] = true;
    if (mate[u] != kUnset) continue;
    std::size_t best = kUnset;
    double best_score = 0.0;
    for (const auto& [v, w] : nbrs[u]) {
      if (mate[v] != kUnset || v == u) continue;
      const double score = w * (1.0 / deg[u] + 1.0 / deg[v]);
      if (best == kUnset || score > best_score) {
        best = v;
        best_score = score;
      }
    }
    if (best == kUnset) {
      mate[u] = u;
      m.singletons.push_back(u);
    } else {
      mate[u] = best;
      mate[best] = u;
      m.pairs.emplace_back(std::min(u, best), std::max(u, best));
    }
  }
  std::sort(m.singletons.begin(), m.singletons.end());
  return m;
}

CoarseGraph coarsen_once(const SparseGraph& g, const Matching& m) {
  // Clusters keyed by their smallest member.
  std::vector<std::size_t> leader(g.size(), kUnset);
  for (const auto& [a, b] : m.pairs) {
    require(a < g.size() && b < g.size() && a != b, ErrorKind::Validation, "bad matched pair");
    require(leader[a] == kUnset && leader[b] == kUnset, ErrorKind::Validation,
            "node matched twice");
    leader[a] = leader[b] = std::min(a, b);
  }
  for (auto s : m.singletons) {
    require(s < g.size() && leader[s] == kUnset, ErrorKind::Validation, "node matched twice");
    leader[s] = s;
  }
  for (std::size_t i = 0; i < g.size(); ++i)
    require(leader[i] != kUnset, ErrorKind::Validation,
            "node " + std::to_string(i) + " missing from matching");

  CoarseGraph out;
  out.parent.assign(g.size(), kUnset);
  std::vector<std::size_t> id_of_leader(g.size(), kUnset);
  std::size_t next = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (leader[i] == i) id_of_leader[i] = next++;
    out.parent[i] = id_of_leader[leader[i]];
  }

  std::map<std::pair<std::size_t, std::size_t>, double> merged;
  for (const auto& e : g.edges()) {
    auto a = out.parent[e.src], b = out.parent[e.dst];
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    merged[{a, b}] += e.weight;
  }
  std::vector<Edge> edges;
  edges.reserve(merged.size());
  for (const auto& [key, w] : merged)
    if (w != 0.0) edges.push_back({key.first, key.second, w});
  out.graph = SparseGraph(next, std::move(edges));
  return out;
}

std::vector<std::size_t> CoarseningHierarchy::inverse_perm() const {
  std::vector<std::size_t> inv(original_size, kUnset);
  for (std::size_t p = 0; p < perm.size(); ++p)
    if (perm[p] < original_size) inv[perm[p]] = p;
  return inv;
}

CoarseningHierarchy build_hierarchy(const SparseGraph& g, int n_levels, std::uint64_t seed) {
  require(n_levels >= 1, ErrorKind::Config, "hierarchy needs at least one level");
  require(g.fake_count() == 0, ErrorKind::Validation, "input graph already has fake nodes");
  const auto depth = static_cast<std::size_t>(n_levels);

  std::mt19937_64 rng(seed);
  std::vector<SparseGraph> graphs{g};
  std::vector<std::vector<std::size_t>> parents;
  for (std::size_t l = 0; l < depth; ++l) {
    auto coarse = coarsen_once(graphs.back(), heavy_edge_matching(graphs.back(), rng()));
    parents.push_back(std::move(coarse.parent));
    graphs.push_back(std::move(coarse.graph));
  }

  // Lay out the binary tree top-down: every coarse node owns two consecutive
  // slots one level below, padded with fake nodes where it has fewer real
  // children.
  std::vector<std::vector<std::size_t>> order(depth + 1);
  order[depth].resize(graphs[depth].size());
  std::iota(order[depth].begin(), order[depth].end(), std::size_t{0});
  for (std::size_t l = depth; l-- > 0;) {
    const std::size_t real = graphs[l].size();
    std::vector<std::vector<std::size_t>> children(graphs[l + 1].size());
    for (std::size_t i = 0; i < real; ++i) children[parents[l][i]].push_back(i);
    std::size_t next_fake = real;
    auto& layout = order[l];
    for (auto a : order[l + 1]) {
      if (a < graphs[l + 1].size()) {
        for (auto c : children[a]) layout.push_back(c);
        if (children[a].size() == 1) layout.push_back(next_fake++);
      } else {
        layout.push_back(next_fake++);
        layout.push_back(next_fake++);
      }
    }
  }

  CoarseningHierarchy h;
  h.original_size = g.size();
  h.perm = order[0];
  for (std::size_t l = 0; l <= depth; ++l) {
    const std::size_t real = graphs[l].size();
    const auto& layout = order[l];
    std::vector<std::size_t> pos(real, kUnset);
    std::vector<bool> fake(layout.size(), false);
    for (std::size_t p = 0; p < layout.size(); ++p) {
      if (layout[p] < real)
        pos[layout[p]] = p;
      else
        fake[p] = true;
    }
    std::vector<Edge> edges;
    edges.reserve(graphs[l].edge_count());
    for (const auto& e : graphs[l].edges()) edges.push_back({pos[e.src], pos[e.dst], e.weight});
    h.fake_counts.push_back(layout.size() - real);
    h.levels.emplace_back(layout.size(), std::move(edges), std::move(fake));
    if (l < depth) {
      std::vector<std::size_t> up(layout.size());
      for (std::size_t p = 0; p < layout.size(); ++p) up[p] = p / 2;
      h.parent.push_back(std::move(up));
    }
  }
  return h;
}

NodeSignal permute_signal(const NodeSignal& x, const CoarseningHierarchy& h) {
  require(static_cast<std::size_t>(x.rows()) == h.original_size, ErrorKind::Dimension,
          "signal has " + std::to_string(x.rows()) + " rows, hierarchy expects " +
              std::to_string(h.original_size));
  NodeSignal out = NodeSignal::Zero(static_cast<Eigen::Index>(h.perm.size()), x.cols());
  for (std::size_t p = 0; p < h.perm.size(); ++p)
    if (h.perm[p] < h.original_size)
      out.row(static_cast<Eigen::Index>(p)) = x.row(static_cast<Eigen::Index>(h.perm[p]));
  return out;
}

NodeSignal pool(const NodeSignal& x, int factor, std::vector<Eigen::Index>* argmax) {
  require(factor >= 1, ErrorKind::Validation, "pooling factor must be positive");
  require(x.rows() % factor == 0, ErrorKind::Dimension,
          std::to_string(x.rows()) + " rows are not divisible by pooling factor " +
              std::to_string(factor));
  const Eigen::Index rows = x.rows() / factor;
  NodeSignal out(rows, x.cols());
  if (argmax) argmax->assign(static_cast<std::size_t>(rows * x.cols()), 0);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      Eigen::Index best = r * factor;
      for (Eigen::Index k = 1; k < factor; ++k)
        if (x(r * factor + k, c) > x(best, c)) best = r * factor + k;
      out(r, c) = x(best, c);
      if (argmax) (*argmax)[static_cast<std::size_t>(r * x.cols() + c)] = best;
    }
  }
  return out;
}

}  // namespace petnet
