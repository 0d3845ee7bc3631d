#ifndef PETNET_TRAINING_HPP
#define PETNET_TRAINING_HPP

#include "petnet/graph.hpp"
#include "petnet/network.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace petnet {

enum class OptimizerKind { Adam, SgdMomentum };

const char* to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& s);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 5e-4;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Dataset {
  SignalMatrix signals;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t n_nodes() const { return signals.n_nodes(); }
  std::size_t n_subjects() const { return signals.n_subjects(); }
  int n_classes() const { return static_cast<int>(class_names.size()); }

  /// Label count matches subjects and labels are in range; optionally every
  /// class must have at least one subject.
  void validate(bool require_all_classes = true) const;
  Dataset subset(const std::vector<std::size_t>& subjects) const;
  /// Samples as rows: (subjects x nodes).
  Matrix samples() const;
};

/// Mean of -log p[label], p clamped to >= 1e-12.
double cross_entropy_loss(const Matrix& probs, std::span<const int> labels);

struct OptimizerState {
  Parameters first_moment;
  Parameters second_moment;
  std::uint64_t step = 0;
};

OptimizerState make_optimizer_state(const Parameters& params);

/// Adam (bias-corrected, beta1 0.9, beta2 0.999, eps 1e-8) or heavy-ball
/// momentum. Weight decay is decoupled and skips biases.
void optimizer_step(Parameters& params, const Parameters& grads, OptimizerState& state,
                    const TrainConfig& cfg);

struct CurvePoint {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;  // NaN without a holdout
};

struct TrainResult {
  ChebNetModel model;
  std::vector<CurvePoint> curve;
};

inline constexpr int kHierarchyLevels = 3;

/// Coarsens `g`, initializes a model and runs seeded mini-batch epochs.
TrainResult train(const Dataset& ds, const SparseGraph& g, const NetworkConfig& ncfg,
                  const TrainConfig& tcfg, const Dataset* holdout = nullptr);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

enum class GraphMode { Inferred, Empty, Random };

const char* to_string(GraphMode mode);
GraphMode parse_graph_mode(const std::string& s);

/// Empty graph (no edges) or `n_edges` distinct uniform pairs with weights
/// uniform in (0, 1].
SparseGraph baseline_graph(GraphMode kind, std::size_t n, std::size_t n_edges,
                           std::uint64_t seed);

struct CrossValidationConfig {
  int folds = 5;
  int repeats = 10;
  double threshold = 0.7;
  GraphMode graph_mode = GraphMode::Inferred;
  int jobs = 1;
  std::uint64_t seed = 0;
  /// Record per-epoch test accuracy in the learning curves.
  bool track_validation = true;

  void validate() const;
};

/// Fold index per subject; classes are dealt round-robin after a seeded
/// shuffle so per-class fold counts differ by at most one.
std::vector<int> stratified_folds(std::span<const int> labels, int n_classes, int folds,
                                  std::uint64_t seed);

struct RunSeeds {
  std::uint64_t network;
  std::uint64_t training;
  std::uint64_t graph;
};

RunSeeds derive_run_seeds(std::uint64_t master, int repeat, int fold);

struct RunOutcome {
  std::vector<int> predictions;  // one per test subject
  std::vector<CurvePoint> curve;
  std::size_t graph_edges = 0;
};

using Learner =
    std::function<RunOutcome(const Dataset& train, const Dataset& test, const RunSeeds& seeds)>;

/// Infers (or replaces) the graph from the training split and trains a fresh model.
Learner chebnet_learner(const NetworkConfig& ncfg, const TrainConfig& tcfg,
                        const CrossValidationConfig& cv);

struct RunRecord {
  int repeat = 0;
  int fold = 0;
  double accuracy = 0.0;
  std::vector<std::vector<int>> confusion;  // [true][predicted]
  std::vector<std::size_t> test_subjects;
  std::vector<CurvePoint> curve;
  std::size_t graph_edges = 0;
};

struct ExperimentReport {
  std::vector<RunRecord> runs;  // ordered by (repeat, fold)
  double mean = 0.0;            // unweighted mean of run accuracies
  double stddev = 0.0;          // sample standard deviation
  std::vector<std::string> class_names;
  int folds = 0;
  int repeats = 0;
  std::string graph_mode;
};

ExperimentReport cross_validate(const Dataset& ds, const CrossValidationConfig& cv,
                                const Learner& learner);

ExperimentReport cross_validate(const Dataset& ds, const NetworkConfig& ncfg,
                                const TrainConfig& tcfg, const CrossValidationConfig& cv);

}  // namespace petnet

#endif
