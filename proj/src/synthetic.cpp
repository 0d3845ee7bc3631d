#include "petnet/synthetic.hpp"

#include "petnet/error.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace petnet {

void SyntheticSpec::validate() const {
  require(!block_sizes.empty(), ErrorKind::Config, "need at least one community");
  require(std::accumulate(block_sizes.begin(), block_sizes.end(), std::size_t{0}) == n_nodes,
          ErrorKind::Config, "community sizes must sum to the node count");
  require(n_classes >= 2, ErrorKind::Config, "need at least 2 classes");
  require(subjects_per_class >= 1, ErrorKind::Config, "need at least one subject per class");
  require(strength > 0.0 && std::isfinite(strength), ErrorKind::Config, "strength must be positive");
  require(noise > 0.0 && std::isfinite(noise), ErrorKind::Config, "noise must be positive");
  if (!offsets.empty()) {
    require(offsets.size() == static_cast<std::size_t>(n_classes), ErrorKind::Config,
            "offsets need one row per class");
    for (const auto& row : offsets)
      require(row.size() == block_sizes.size(), ErrorKind::Config,
              "offsets need one entry per community");
  }
}

std::vector<std::vector<double>> SyntheticSpec::resolved_offsets() const {
  if (!offsets.empty()) return offsets;
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n_classes),
                                       std::vector<double>(block_sizes.size(), 0.0));
  for (std::size_t c = 0; c < out.size(); ++c) out[c][c % block_sizes.size()] = class_offset;
  return out;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto offsets = spec.resolved_offsets();
  const std::size_t n_subjects = spec.subjects_per_class * static_cast<std::size_t>(spec.n_classes);

  std::vector<std::size_t> community(spec.n_nodes);
  std::vector<Edge> truth;
  {
    std::size_t start = 0;
    for (std::size_t b = 0; b < spec.block_sizes.size(); ++b) {
      const std::size_t end = start + spec.block_sizes[b];
      for (std::size_t i = start; i < end; ++i) {
        community[i] = b;
        for (std::size_t j = i + 1; j < end; ++j) truth.push_back({i, j, 1.0});
      }
      start = end;
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix values(static_cast<Eigen::Index>(spec.n_nodes), static_cast<Eigen::Index>(n_subjects));
  std::vector<int> labels(n_subjects);
  std::vector<std::string> subject_ids(n_subjects), node_ids(spec.n_nodes);
  std::vector<double> latent(spec.block_sizes.size());
  for (std::size_t s = 0; s < n_subjects; ++s) {
    const auto cls = static_cast<int>(s % static_cast<std::size_t>(spec.n_classes));
    labels[s] = cls;
    subject_ids[s] = "s" + std::to_string(s);
    for (auto& z : latent) z = gauss(rng);
    for (std::size_t i = 0; i < spec.n_nodes; ++i) {
      const auto b = community[i];
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) =
          spec.strength * latent[b] + spec.noise * gauss(rng) + offsets[static_cast<std::size_t>(cls)][b];
    }
  }
  for (std::size_t i = 0; i < spec.n_nodes; ++i) node_ids[i] = "roi" + std::to_string(i);

  SyntheticData out;
  out.dataset.signals = SignalMatrix(std::move(values), std::move(node_ids), std::move(subject_ids));
  out.dataset.labels = std::move(labels);
  for (int c = 0; c < spec.n_classes; ++c) out.dataset.class_names.push_back("class" + std::to_string(c));
  out.ground_truth = SparseGraph(spec.n_nodes, std::move(truth));
  return out;
}

}  // namespace petnet
