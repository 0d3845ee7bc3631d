#ifndef PETNET_SYNTHETIC_HPP
#define PETNET_SYNTHETIC_HPP

#include "petnet/graph.hpp"
#include "petnet/training.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace petnet {

/// Planted community model: within a community every node shares one latent
/// factor per subject, so intra-community correlation is
/// strength^2 / (strength^2 + noise^2) before class offsets.
struct SyntheticSpec {
  std::size_t n_nodes = 120;
  std::size_t subjects_per_class = 50;
  int n_classes = 2;
  std::vector<std::size_t> block_sizes{30, 30, 30, 30};
  double strength = 0.9;
  double noise = 0.3;
  /// offsets[class][community]; empty means `class_offset` on community
  /// (class mod communities) and zero elsewhere.
  std::vector<std::vector<double>> offsets;
  double class_offset = 2.5;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<std::vector<double>> resolved_offsets() const;
};

struct SyntheticData {
  Dataset dataset;
  /// Every intra-community pair, weight 1.
  SparseGraph ground_truth;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace petnet

#endif
