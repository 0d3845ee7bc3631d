#include "petnet/training.hpp"

#include "petnet/coarsening.hpp"
#include "petnet/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>
#include <unordered_set>

namespace petnet {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEpsilon = 1e-8;

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

Matrix rows_of(const Matrix& samples, std::span<const std::size_t> which) {
  Matrix out(static_cast<Eigen::Index>(which.size()), samples.cols());
  for (std::size_t k = 0; k < which.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = samples.row(static_cast<Eigen::Index>(which[k]));
  return out;
}

}  // namespace

const char* to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "sgd_momentum";
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd_momentum" || s == "sgd") return OptimizerKind::SgdMomentum;
  fail(ErrorKind::Config, "unknown optimizer '" + s + "'");
}

void TrainConfig::validate() const {
  require(epochs >= 0, ErrorKind::Config, "epochs must be nonnegative");
  require(batch_size >= 1, ErrorKind::Config, "batch size must be positive");
  require(learning_rate > 0.0, ErrorKind::Config, "learning rate must be positive");
  require(weight_decay >= 0.0, ErrorKind::Config, "weight decay must be nonnegative");
  require(momentum >= 0.0 && momentum < 1.0, ErrorKind::Config, "momentum must lie in [0, 1)");
}

void Dataset::validate(bool require_all_classes) const {
  signals.validate();
  require(labels.size() == n_subjects(), ErrorKind::Dimension,
          "dataset has " + std::to_string(n_subjects()) + " subjects but " +
              std::to_string(labels.size()) + " labels");
  require(class_names.size() >= 2, ErrorKind::Validation, "dataset needs at least 2 classes");
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (int y : labels) {
    require(y >= 0 && y < n_classes(), ErrorKind::Validation,
            "label index " + std::to_string(y) + " out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < counts.size() && require_all_classes; ++c)
    require(counts[c] > 0, ErrorKind::Validation, "class '" + class_names[c] + "' has no subjects");
}

Dataset Dataset::subset(const std::vector<std::size_t>& subjects) const {
  Dataset out;
  out.signals = signals.select_subjects(subjects);
  out.class_names = class_names;
  out.labels.reserve(subjects.size());
  for (auto s : subjects) out.labels.push_back(labels.at(s));
  return out;
}

Matrix Dataset::samples() const { return signals.values.transpose(); }

double cross_entropy_loss(const Matrix& probs, std::span<const int> labels) {
  require(static_cast<std::size_t>(probs.rows()) == labels.size(), ErrorKind::Dimension,
          "probability rows do not match label count");
  require(!labels.empty(), ErrorKind::Dimension, "empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int y = labels[r];
    require(y >= 0 && y < probs.cols(), ErrorKind::Validation,
            "label " + std::to_string(y) + " out of range for " + std::to_string(probs.cols()) +
                " classes");
    total -= std::log(std::max(probs(static_cast<Eigen::Index>(r), y), 1e-12));
  }
  return total / static_cast<double>(labels.size());
}

OptimizerState make_optimizer_state(const Parameters& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void optimizer_step(Parameters& params, const Parameters& grads, OptimizerState& state,
                    const TrainConfig& cfg) {
  auto p = tensors(params);
  const auto g = tensors(grads);
  auto m = tensors(state.first_moment);
  auto v = tensors(state.second_moment);
  require(p.size() == g.size() && p.size() == m.size(), ErrorKind::Dimension,
          "optimizer tensor lists disagree");
  ++state.step;
  const double lr = cfg.learning_rate;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(kBeta1, t);
  const double correct2 = 1.0 - std::pow(kBeta2, t);

  for (std::size_t k = 0; k < p.size(); ++k) {
    require(p[k].data.size() == g[k].data.size(), ErrorKind::Dimension,
            "gradient shape mismatch for " + p[k].name);
    const double decay = p[k].is_bias ? 0.0 : cfg.weight_decay;
    for (std::size_t i = 0; i < p[k].data.size(); ++i) {
      const double grad = g[k].data[i];
      double& w = p[k].data[i];
      double step;
      if (cfg.optimizer == OptimizerKind::Adam) {
        m[k].data[i] = kBeta1 * m[k].data[i] + (1.0 - kBeta1) * grad;
        v[k].data[i] = kBeta2 * v[k].data[i] + (1.0 - kBeta2) * grad * grad;
        const double m_hat = m[k].data[i] / correct1;
        const double v_hat = v[k].data[i] / correct2;
        step = m_hat / (std::sqrt(v_hat) + kEpsilon);
      } else {
        m[k].data[i] = cfg.momentum * m[k].data[i] + grad;
        step = m[k].data[i];
      }
      w -= lr * (step + decay * w);
    }
  }
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  require(predicted.size() == truth.size(), ErrorKind::Dimension,
          "prediction and label counts differ");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) hits += predicted[k] == truth[k];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

TrainResult train(const Dataset& ds, const SparseGraph& g, const NetworkConfig& ncfg,
                  const TrainConfig& tcfg, const Dataset* holdout) {
  ds.validate();
  tcfg.validate();
  ncfg.validate();
  require(g.size() == ds.n_nodes(), ErrorKind::Dimension,
          "graph has " + std::to_string(g.size()) + " nodes, dataset has " +
              std::to_string(ds.n_nodes()));
  require(ncfg.n_classes == ds.n_classes(), ErrorKind::Config,
          "network is configured for " + std::to_string(ncfg.n_classes) +
              " classes, dataset has " + std::to_string(ds.n_classes()));
  if (holdout)
    require(holdout->n_nodes() == ds.n_nodes(), ErrorKind::Dimension,
            "holdout node count differs from training data");

  TrainResult result{init_model(ncfg, build_hierarchy(g, kHierarchyLevels, ncfg.seed)), {}};
  auto& model = result.model;
  auto state = make_optimizer_state(model.params);

  const Matrix samples = ds.samples();
  const Matrix holdout_samples = holdout ? holdout->samples() : Matrix();
  std::vector<std::size_t> order(ds.n_subjects());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(tcfg.seed);
  const auto batch_size = static_cast<std::size_t>(tcfg.batch_size);

  std::vector<int> batch_labels;
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const auto count = std::min(batch_size, order.size() - start);
      const std::span<const std::size_t> which(order.data() + start, count);
      batch_labels.clear();
      for (auto s : which) batch_labels.push_back(ds.labels[s]);

      auto fwd = forward(model, rows_of(samples, which), true, &rng);
      const double loss = cross_entropy_loss(fwd.probs, batch_labels);
      if (!std::isfinite(loss))
        fail(ErrorKind::Runtime, "training diverged at epoch " + std::to_string(epoch) +
                                     ": non-finite loss");
      loss_sum += loss * static_cast<double>(count);
      const auto grads = backward(model, *fwd.cache, batch_labels);
      optimizer_step(model.params, grads, state, tcfg);
      ++model.revision;
    }

    CurvePoint point;
    point.epoch = epoch;
    point.train_loss = loss_sum / static_cast<double>(order.size());
    point.train_acc = accuracy(predict(model, samples), ds.labels);
    point.val_acc = holdout ? accuracy(predict(model, holdout_samples), holdout->labels)
                            : std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(point.train_loss))
      fail(ErrorKind::Runtime, "training diverged at epoch " + std::to_string(epoch));
    result.curve.push_back(point);
  }
  return result;
}

const char* to_string(GraphMode mode) {
  switch (mode) {
    case GraphMode::Inferred: return "inferred";
    case GraphMode::Empty: return "empty";
    case GraphMode::Random: return "random";
  }
  return "inferred";
}

GraphMode parse_graph_mode(const std::string& s) {
  if (s == "inferred") return GraphMode::Inferred;
  if (s == "empty") return GraphMode::Empty;
  if (s == "random") return GraphMode::Random;
  fail(ErrorKind::Config, "unknown graph mode '" + s + "'");
}

SparseGraph baseline_graph(GraphMode kind, std::size_t n, std::size_t n_edges,
                           std::uint64_t seed) {
  require(kind != GraphMode::Inferred, ErrorKind::Config,
          "baseline graphs are either empty or random");
  if (kind == GraphMode::Empty) return SparseGraph(n);

  const std::uint64_t pairs = n < 2 ? 0 : static_cast<std::uint64_t>(n) * (n - 1) / 2;
  require(n_edges <= pairs, ErrorKind::Validation,
          std::to_string(n_edges) + " edges requested but " + std::to_string(n) +
              " nodes admit only " + std::to_string(pairs));

  // Floyd's sampling of distinct pair indices.
  std::mt19937_64 rng(seed);
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(n_edges * 2);
  for (std::uint64_t j = pairs - n_edges; j < pairs; ++j) {
    const auto t = std::uniform_int_distribution<std::uint64_t>(0, j)(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> picked(chosen.begin(), chosen.end());
  std::sort(picked.begin(), picked.end());

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  edges.reserve(n_edges);
  std::size_t row = 0;
  std::uint64_t row_start = 0;  // pair index of (row, row + 1)
  for (auto t : picked) {
    while (t >= row_start + (n - 1 - row)) {
      row_start += n - 1 - row;
      ++row;
    }
    const std::size_t col = row + 1 + static_cast<std::size_t>(t - row_start);
    edges.push_back({row, col, 1.0 - unit(rng)});
  }
  return SparseGraph(n, std::move(edges));
}

void CrossValidationConfig::validate() const {
  require(folds >= 2, ErrorKind::Config, "need at least 2 folds");
  require(repeats >= 1, ErrorKind::Config, "need at least 1 repeat");
  require(threshold >= 0.0 && threshold <= 1.0, ErrorKind::Config,
          "threshold must lie in [0, 1]");
  require(jobs >= 1, ErrorKind::Config, "jobs must be positive");
}

std::vector<int> stratified_folds(std::span<const int> labels, int n_classes, int folds,
                                  std::uint64_t seed) {
  require(folds >= 2, ErrorKind::Config, "need at least 2 folds");
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(n_classes));
  for (std::size_t s = 0; s < labels.size(); ++s) {
    require(labels[s] >= 0 && labels[s] < n_classes, ErrorKind::Validation, "label out of range");
    members[static_cast<std::size_t>(labels[s])].push_back(s);
  }
  for (std::size_t c = 0; c < members.size(); ++c)
    require(members[c].size() >= static_cast<std::size_t>(folds), ErrorKind::Config,
            "class " + std::to_string(c) + " has " + std::to_string(members[c].size()) +
                " subjects, fewer than " + std::to_string(folds) + " folds");

  std::mt19937_64 rng(seed);
  std::vector<int> fold_of(labels.size(), 0);
  std::size_t dealt = 0;
  for (auto& group : members) {
    std::shuffle(group.begin(), group.end(), rng);
    for (auto s : group) fold_of[s] = static_cast<int>(dealt++ % static_cast<std::size_t>(folds));
  }
  return fold_of;
}

RunSeeds derive_run_seeds(std::uint64_t master, int repeat, int fold) {
  const auto r = static_cast<std::uint64_t>(repeat);
  const auto f = static_cast<std::uint64_t>(fold);
  return {mix_seed({master, r, f, 1}), mix_seed({master, r, f, 2}), mix_seed({master, r, f, 3})};
}

Learner chebnet_learner(const NetworkConfig& ncfg, const TrainConfig& tcfg,
                        const CrossValidationConfig& cv) {
  return [ncfg, tcfg, cv](const Dataset& train_set, const Dataset& test_set,
                          const RunSeeds& seeds) {
    // The graph only ever sees the training split.
    const auto inferred = infer_graph(pearson_correlation(train_set.signals), cv.threshold);
    SparseGraph graph = inferred;
    if (cv.graph_mode != GraphMode::Inferred)
      graph = baseline_graph(cv.graph_mode, inferred.size(), inferred.edge_count(), seeds.graph);

    NetworkConfig net = ncfg;
    net.seed = seeds.network;
    net.n_classes = train_set.n_classes();
    TrainConfig tc = tcfg;
    tc.seed = seeds.training;

    auto trained = train(train_set, graph, net, tc, cv.track_validation ? &test_set : nullptr);
    RunOutcome out;
    out.predictions = predict(trained.model, test_set.samples());
    out.curve = std::move(trained.curve);
    out.graph_edges = graph.edge_count();
    return out;
  };
}

ExperimentReport cross_validate(const Dataset& ds, const CrossValidationConfig& cv,
                                const Learner& learner) {
  ds.validate();
  cv.validate();

  std::vector<std::vector<int>> assignments;
  for (int r = 0; r < cv.repeats; ++r)
    assignments.push_back(stratified_folds(ds.labels, ds.n_classes(), cv.folds,
                                           mix_seed({cv.seed, static_cast<std::uint64_t>(r), 0})));

  const std::size_t total = static_cast<std::size_t>(cv.folds * cv.repeats);
  std::vector<RunRecord> runs(total);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t task = next++; task < total; task = next++) {
      try {
        const int r = static_cast<int>(task) / cv.folds;
        const int f = static_cast<int>(task) % cv.folds;
        std::vector<std::size_t> train_idx, test_idx;
        const auto& fold_of = assignments[static_cast<std::size_t>(r)];
        for (std::size_t s = 0; s < fold_of.size(); ++s)
          (fold_of[s] == f ? test_idx : train_idx).push_back(s);

        const auto test_set = ds.subset(test_idx);
        auto outcome = learner(ds.subset(train_idx), test_set, derive_run_seeds(cv.seed, r, f));
        require(outcome.predictions.size() == test_idx.size(), ErrorKind::Runtime,
                "learner returned the wrong number of predictions");

        RunRecord& rec = runs[task];
        rec.repeat = r;
        rec.fold = f;
        rec.test_subjects = test_idx;
        rec.accuracy = accuracy(outcome.predictions, test_set.labels);
        const auto c = static_cast<std::size_t>(ds.n_classes());
        rec.confusion.assign(c, std::vector<int>(c, 0));
        for (std::size_t k = 0; k < test_idx.size(); ++k) {
          const int pred = outcome.predictions[k];
          require(pred >= 0 && pred < ds.n_classes(), ErrorKind::Runtime,
                  "learner predicted an unknown class");
          ++rec.confusion[static_cast<std::size_t>(test_set.labels[k])][static_cast<std::size_t>(pred)];
        }
        rec.curve = std::move(outcome.curve);
        rec.graph_edges = outcome.graph_edges;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = total;
      }
    }
  };

  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cv.jobs), total);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentReport report;
  report.runs = std::move(runs);
  report.class_names = ds.class_names;
  report.folds = cv.folds;
  report.repeats = cv.repeats;
  report.graph_mode = to_string(cv.graph_mode);
  double sum = 0.0;
  for (const auto& r : report.runs) sum += r.accuracy;
  report.mean = sum / static_cast<double>(total);
  double sq = 0.0;
  for (const auto& r : report.runs) sq += (r.accuracy - report.mean) * (r.accuracy - report.mean);
  report.stddev = total > 1 ? std::sqrt(sq / static_cast<double>(total - 1)) : 0.0;
  return report;
}

ExperimentReport cross_validate(const Dataset& ds, const NetworkConfig& ncfg,
                                const TrainConfig& tcfg, const CrossValidationConfig& cv) {
  return cross_validate(ds, cv, chebnet_learner(ncfg, tcfg, cv));
}

}  // namespace petnet
