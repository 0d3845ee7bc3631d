#ifndef PETNET_NETWORK_HPP
#define PETNET_NETWORK_HPP

#include "petnet/coarsening.hpp"
#include "petnet/graph.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace petnet {

inline constexpr std::size_t kConvLayers = 3;

struct NetworkConfig {
  int K = 25;
  std::array<int, kConvLayers> conv_channels{32, 64, 128};
  int fc_width = 128;
  int n_classes = 2;
  double dropout_keep = 0.5;
  LaplacianKind laplacian_kind = LaplacianKind::Normalized;
  std::uint64_t seed = 0;

  void validate() const;
};

using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

/// Trainable tensors. The same layout holds gradients.
///
/// conv_theta[l] stacks the K coefficient matrices vertically: rows
/// [k F_in, (k + 1) F_in) hold the (F_in x F_out) block for T_k.
struct Parameters {
  std::array<Matrix, kConvLayers> conv_theta;
  std::array<RowVector, kConvLayers> conv_bias;
  Matrix fc1_weight;
  RowVector fc1_bias;
  Matrix fc2_weight;
  RowVector fc2_bias;

  Parameters zeros_like() const;
  std::size_t count() const;
};

template <class T>
struct BasicTensorView {
  std::string name;
  std::span<T> data;
  bool is_bias;
};

using TensorView = BasicTensorView<double>;
using ConstTensorView = BasicTensorView<const double>;

/// Every tensor in a fixed order (conv0..2 theta/bias, fc1, fc2).
std::vector<TensorView> tensors(Parameters& p);
std::vector<ConstTensorView> tensors(const Parameters& p);

struct ChebNetModel {
  NetworkConfig config;
  CoarseningHierarchy hierarchy;
  /// Rescaled Laplacians of hierarchy levels 0..2.
  std::array<LaplacianOp, kConvLayers> laplacians;
  Parameters params;
  /// Bumped on every parameter update; caches remember the revision they saw.
  std::uint64_t revision = 0;

  std::size_t input_nodes() const { return hierarchy.original_size; }
  std::size_t parameter_count() const { return params.count(); }
};

/// Rescaled Laplacians for the first three hierarchy levels.
std::array<LaplacianOp, kConvLayers> level_laplacians(const CoarseningHierarchy& h,
                                                      LaplacianKind kind);

ChebNetModel init_model(const NetworkConfig& cfg, const CoarseningHierarchy& h);

/// Intermediates of one train-mode forward pass. Activations are stored
/// node-major: a (nodes x batch * channels) matrix whose row i holds the
/// channels of node i for every sample in turn.
struct ForwardCache {
  std::size_t batch = 0;
  std::uint64_t revision = 0;
  std::array<Matrix, kConvLayers> basis;  // K stacked (N x B F_in) blocks
  std::array<Matrix, kConvLayers> pre;    // conv output before the rectifier
  std::array<std::vector<Eigen::Index>, kConvLayers> pool_argmax;
  Matrix flat;
  Matrix fc1_pre;
  Matrix dropout_mask;  // 0 or 1 / keep
  Matrix fc1_out;
  Matrix probs;
};

struct ForwardResult {
  Matrix probs;
  std::optional<ForwardCache> cache;
};

/// x_batch has one row per sample and one column per original node.
/// Train mode applies dropout from `rng` and returns a cache.
ForwardResult forward(const ChebNetModel& m, const Matrix& x_batch, bool train_mode,
                      std::mt19937_64* rng = nullptr);

/// Output of the three conv/pool stages, node-major (N_3 x B F_3).
Matrix conv_stack(const ChebNetModel& m, const Matrix& x_batch);

/// Gradients of the mean cross-entropy for the batch that produced `cache`.
Parameters backward(const ChebNetModel& m, const ForwardCache& cache,
                    std::span<const int> labels);

/// Row-wise argmax of inference-mode probabilities, lowest index on ties.
std::vector<int> predict(const ChebNetModel& m, const Matrix& x_batch);
std::vector<int> argmax_rows(const Matrix& probs);

}  // namespace petnet

#endif
