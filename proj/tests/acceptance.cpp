// Acceptance checks. Prints one PASS/FAIL line per criterion; exits nonzero if
// any fails. Usage: acceptance [--cli path/to/petnet] [--only N[,N...]]

#include "petnet/benchmark.hpp"
#include "petnet/coarsening.hpp"
#include "petnet/io.hpp"
#include "petnet/network.hpp"
#include "petnet/serialization.hpp"
#include "petnet/spectral.hpp"
#include "petnet/synthetic.hpp"
#include "petnet/training.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <sys/wait.h>

using namespace petnet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

NodeSignal random_signal(std::mt19937_64& rng, std::size_t n, Eigen::Index channels) {
  std::normal_distribution<double> g;
  NodeSignal x(static_cast<Eigen::Index>(n), channels);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  return x;
}

double scalar_chebyshev(std::size_t k, double x) {
  double t0 = 1.0, t1 = x;
  if (k == 0) return t0;
  for (std::size_t j = 2; j <= k; ++j) {
    const double t2 = 2 * x * t1 - t0;
    t0 = t1;
    t1 = t2;
  }
  return t1;
}

Outcome spectral_equivalence() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> coef(-1, 1), density(0.1, 0.6);
  std::uniform_int_distribution<int> size(2, 20), order(1, 8);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(size(rng));
    const auto kind = trial % 2 ? LaplacianKind::Normalized : LaplacianKind::Combinatorial;
    const auto lap = rescaled_laplacian(test::random_graph(rng, n, density(rng)), kind);
    FilterCoefficients mono{Basis::Monomial, {}};
    for (int k = order(rng); k > 0; --k) mono.theta.push_back(coef(rng));
    const auto x = random_signal(rng, n, 3);
    const auto a = exact_spectral_filter(lap, x, mono);
    const auto b = chebyshev_filter(lap, x, chebyshev_from_monomial(mono));
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  const double t = seconds_since(start);
  return {worst <= 1e-9 && t < 10.0, "max abs err " + fmt(worst) + ", " + fmt(t) + " s"};
}

Outcome chebyshev_oracle() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> coef(-1, 1);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 1 + static_cast<std::size_t>(trial % 20);
    const auto kind = trial % 2 ? LaplacianKind::Normalized : LaplacianKind::Combinatorial;
    const auto lap = rescaled_laplacian(test::random_graph(rng, n, 0.4), kind);
    std::vector<double> theta(1 + static_cast<std::size_t>(trial % 10));
    for (auto& t : theta) t = coef(rng);
    const auto x = random_signal(rng, n, 2);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(lap.entries));
    Eigen::VectorXd response = Eigen::VectorXd::Zero(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < response.size(); ++i)
      for (std::size_t k = 0; k < theta.size(); ++k)
        response(i) += theta[k] * scalar_chebyshev(k, es.eigenvalues()(i));
    const Eigen::MatrixXd u = es.eigenvectors();
    const Eigen::MatrixXd want = u * response.asDiagonal() * u.transpose() * x;
    const auto got = chebyshev_filter(lap, x, {Basis::Chebyshev, theta});
    worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-10, "max abs err " + fmt(worst) + " over 100 graphs"};
}

Outcome path_locality() {
  int violations = 0, checks = 0;
  for (std::size_t n : {5, 12, 30}) {
    for (auto kind : {LaplacianKind::Combinatorial, LaplacianKind::Normalized}) {
      const auto lap = rescaled_laplacian(test::path_graph(n), kind);
      for (std::size_t source : {std::size_t{0}, n / 2}) {
        NodeSignal delta = NodeSignal::Zero(static_cast<Eigen::Index>(n), 1);
        delta(static_cast<Eigen::Index>(source), 0) = 1.0;
        const auto dist = hop_distances(test::path_graph(n), source);
        for (std::size_t k = 0; k < 15; ++k) {
          std::vector<double> unit(k + 1, 0.0);
          unit.back() = 1.0;
          const auto y = chebyshev_filter(lap, delta, {Basis::Chebyshev, unit});
          for (std::size_t i = 0; i < n; ++i)
            if (dist[i] > k) {
              ++checks;
              violations += y(static_cast<Eigen::Index>(i), 0) != 0.0;
            }
        }
      }
    }
  }
  return {violations == 0 && checks > 0,
          std::to_string(violations) + " nonzero entries beyond distance k in " + std::to_string(checks)};
}

Outcome complexity_trend() {
  BenchmarkConfig cfg;
  cfg.n = 2000;
  cfg.K = 25;
  cfg.densities = {0.01, 0.02};
  cfg.seed = 404;
  cfg.dense_limit = 2000;
  cfg.min_seconds = 0.2;
  const auto rows = run_benchmark(cfg);
  std::map<std::pair<std::size_t, std::string>, BenchmarkRow> by;
  std::vector<std::size_t> edges;
  for (const auto& r : rows) {
    by[{r.edges, r.method}] = r;
    if (r.method == "chebyshev") edges.push_back(r.edges);
  }
  if (edges.size() != 2) return {false, "benchmark returned " + std::to_string(rows.size()) + " rows"};
  const double sparse1 = by[{edges[0], "chebyshev"}].seconds;
  const double sparse2 = by[{edges[1], "chebyshev"}].seconds;
  const double exact1 = by[{edges[0], "exact"}].seconds;
  const double cached1 = by[{edges[0], "exact_cached"}].seconds;
  const double ratio = sparse2 / sparse1;
  const double slowdown = exact1 / sparse1;
  return {ratio >= 1.2 && ratio <= 3.5 && slowdown >= 10.0,
          "|E| " + std::to_string(edges[0]) + "->" + std::to_string(edges[1]) + " time ratio " + fmt(ratio) +
              "; exact/sparse " + fmt(slowdown) + " (cached eigenbasis " + fmt(cached1 / sparse1) + ")"};
}

Outcome gradient_sweep() {
  const auto start = Clock::now();
  std::mt19937_64 rng(505);
  const auto g = test::random_graph(rng, 8, 0.4);
  NetworkConfig cfg;
  cfg.K = 3;
  cfg.conv_channels = {2, 2, 2};
  cfg.fc_width = 4;
  cfg.n_classes = 2;
  cfg.dropout_keep = 1.0;
  cfg.seed = 506;
  auto m = init_model(cfg, build_hierarchy(g, 3, 507));
  // Nonzero biases keep padded nodes off the rectifier kink.
  std::uniform_real_distribution<double> u(0.05, 0.25);
  for (auto& t : tensors(m.params))
    if (t.is_bias)
      for (auto& v : t.data) v = u(rng);

  const auto x = random_signal(rng, 6, 8);
  const std::vector<int> labels{0, 1, 1, 0, 1, 0};
  const auto grads = backward(m, *forward(m, x, true).cache, labels);
  const auto analytic = tensors(std::as_const(grads));
  auto params = tensors(m.params);
  const double eps = 1e-5;
  double worst = 0.0;
  std::size_t checked = 0, total = 0;
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t k = 0; k < params[t].data.size(); ++k) {
      ++total;
      const double a = analytic[t].data[k];
      if (std::abs(a) <= 1e-8) continue;
      const double saved = params[t].data[k];
      params[t].data[k] = saved + eps;
      const double up = cross_entropy_loss(forward(m, x, false).probs, labels);
      params[t].data[k] = saved - eps;
      const double down = cross_entropy_loss(forward(m, x, false).probs, labels);
      params[t].data[k] = saved;
      const double numeric = (up - down) / (2 * eps);
      worst = std::max(worst, std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric)));
      ++checked;
    }
  const double secs = seconds_since(start);
  return {worst <= 1e-4 && checked > 0 && secs < 60.0,
          std::to_string(checked) + " of " + std::to_string(total) + " parameters, worst rel err " +
              fmt(worst) + ", " + fmt(secs) + " s"};
}

std::string hierarchy_problem(const CoarseningHierarchy& h) {
  for (std::size_t l = 0; l + 1 < h.levels.size(); ++l)
    if (h.level_size(l) != 2 * h.level_size(l + 1)) return "level " + std::to_string(l) + " does not halve";
  const std::size_t n0 = h.level_size(0);
  if (h.perm.size() != n0) return "perm size";
  std::vector<std::size_t> sorted = h.perm;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
    if (sorted[i] == sorted[i + 1]) return "perm repeats";
  for (std::size_t l = 0; l < h.levels.size(); ++l) {
    const auto& g = h.levels[l];
    for (const auto& e : g.edges())
      if (g.is_fake(e.src) || g.is_fake(e.dst)) return "fake node with an edge at level " + std::to_string(l);
  }
  return {};
}

Outcome hierarchy_shapes() {
  const auto h = build_hierarchy(test::hierarchical_graph(120), 3, 606);
  std::vector<std::size_t> sizes;
  for (std::size_t l = 0; l < h.levels.size(); ++l) sizes.push_back(h.level_size(l));
  if (sizes != std::vector<std::size_t>{120, 60, 30, 15})
    return {false, "120-node sizes " + std::to_string(sizes[0]) + "/" + std::to_string(sizes[1]) + "/..."};
  std::mt19937_64 rng(607);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 1 + static_cast<std::size_t>(trial * 7 % 90);
    const auto g = test::random_graph(rng, n, trial % 4 == 0 ? 0.02 : 0.15);
    const auto hh = build_hierarchy(g, 1 + trial % 4, static_cast<std::uint64_t>(trial));
    const auto why = hierarchy_problem(hh);
    if (!why.empty()) return {false, "random graph " + std::to_string(trial) + ": " + why};
  }
  return {true, "120/60/30/15; 100 random graphs halve with edgeless fakes"};
}

Outcome empty_graph_permutation() {
  NetworkConfig cfg;
  cfg.K = 25;
  cfg.conv_channels = {4, 4, 4};
  cfg.n_classes = 2;
  const std::size_t n = 120;
  const auto h = build_hierarchy(SparseGraph(n), 3, 707);
  const auto m = init_model(cfg, h);
  std::mt19937_64 rng(708);
  const auto x = random_signal(rng, 3, static_cast<Eigen::Index>(n));
  const Matrix base = conv_stack(m, x);
  const auto inv = h.inverse_perm();
  int mismatched = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    Matrix xp(x.rows(), x.cols());
    for (std::size_t i = 0; i < n; ++i)
      xp.col(static_cast<Eigen::Index>(i)) = x.col(static_cast<Eigen::Index>(order[i]));
    const Matrix moved = conv_stack(m, xp);
    // Each real node owns one slot after three poolings; compare slot by slot.
    for (std::size_t i = 0; i < n; ++i)
      mismatched += !(moved.row(static_cast<Eigen::Index>(inv[i] >> 3)) ==
                      base.row(static_cast<Eigen::Index>(inv[order[i]] >> 3)));
  }
  return {mismatched == 0, std::to_string(mismatched) + " mismatched node outputs over 20 permutations"};
}

Outcome synthetic_end_to_end() {
  const auto start = Clock::now();
  const auto data = generate_synthetic(SyntheticSpec{});
  NetworkConfig ncfg;
  ncfg.K = 8;
  ncfg.conv_channels = {8, 16, 32};
  ncfg.fc_width = 64;
  ncfg.n_classes = 2;
  TrainConfig tcfg;
  tcfg.epochs = 60;
  std::map<GraphMode, double> mean;
  std::string detail;
  for (auto mode : {GraphMode::Inferred, GraphMode::Random, GraphMode::Empty}) {
    CrossValidationConfig cv;
    cv.folds = 5;
    cv.repeats = 3;
    cv.graph_mode = mode;
    cv.track_validation = false;
    mean[mode] = cross_validate(data.dataset, ncfg, tcfg, cv).mean;
    detail += std::string(to_string(mode)) + " " + fmt(mean[mode]) + ", ";
  }
  const double secs = seconds_since(start);
  const double inferred = mean[GraphMode::Inferred];
  return {inferred >= 0.90 && inferred >= mean[GraphMode::Random] && inferred >= mean[GraphMode::Empty] &&
              secs < 900.0,
          detail + fmt(secs) + " s"};
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome protocol_fidelity(const std::string& cli) {
  if (cli.empty()) return {false, "no CLI path given (--cli)"};
  const auto dir = test::scratch_dir("acceptance_protocol");
  const std::string q = "'" + cli + "'";
  if (run(q + " synth --seed 9 --out '" + (dir / "data").string() + "'") != 0) return {false, "synth failed"};
  const std::string net = " --k 2 --channels 1,1,1 --fc 2 --epochs 1 --batch-size 64";
  const std::string cv_cmd = q + " cross-validate --seed 9 --folds 5 --repeats 10 --jobs 2" + net +
                             " --signals '" + (dir / "data/signals.csv").string() + "' --labels '" +
                             (dir / "data/labels.csv").string() + "' --out '" + (dir / "a").string() + "'";
  if (run(cv_cmd) != 0) return {false, "cross-validate failed"};
  if (run(q + " cross-validate --config '" + (dir / "a/manifest.json").string() + "' --out '" +
          (dir / "b").string() + "'") != 0)
    return {false, "rerun from manifest failed"};

  const auto report = read_json_file(dir / "a/report.json");
  const auto& runs = report.at("runs");
  if (runs.size() != 50) return {false, std::to_string(runs.size()) + " runs"};

  const auto ds = load_dataset(dir / "data/signals.csv", dir / "data/labels.csv");
  std::map<std::string, int> label_of;
  for (std::size_t s = 0; s < ds.n_subjects(); ++s) label_of[ds.signals.subject_ids[s]] = ds.labels[s];
  for (int r = 0; r < 10; ++r) {
    std::multiset<std::string> seen;
    std::vector<std::vector<int>> per_fold(5, std::vector<int>(static_cast<std::size_t>(ds.n_classes())));
    for (const auto& run_json : runs) {
      if (run_json.at("repeat").get<int>() != r) continue;
      const int f = run_json.at("fold").get<int>();
      for (const auto& id : run_json.at("test_subjects")) {
        const auto s = id.get<std::string>();
        seen.insert(s);
        ++per_fold[static_cast<std::size_t>(f)][static_cast<std::size_t>(label_of.at(s))];
      }
    }
    if (seen.size() != ds.n_subjects() || std::set<std::string>(seen.begin(), seen.end()).size() != seen.size())
      return {false, "repeat " + std::to_string(r) + " test folds are not a partition"};
    for (int c = 0; c < ds.n_classes(); ++c) {
      int lo = 1 << 30, hi = 0;
      for (const auto& counts : per_fold) {
        lo = std::min(lo, counts[static_cast<std::size_t>(c)]);
        hi = std::max(hi, counts[static_cast<std::size_t>(c)]);
      }
      if (hi - lo > 1) return {false, "class " + std::to_string(c) + " spread " + std::to_string(hi - lo)};
    }
  }
  const bool same = read_all(dir / "a/report.json") == read_all(dir / "b/report.json");
  return {same, same ? "50 runs, exact stratified partitions, manifest rerun byte-identical"
                     : "manifest rerun produced a different report"};
}

Outcome inference_recovery() {
  std::size_t planted = 0, recovered = 0, inferred = 0, false_edges = 0;
  double worst_recall = 1.0, worst_false = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    const auto data = generate_synthetic(spec);
    const auto g = infer_graph(pearson_correlation(data.dataset.signals), 0.7);
    std::set<std::pair<std::size_t, std::size_t>> truth;
    for (const auto& e : data.ground_truth.edges()) truth.insert({e.src, e.dst});
    std::size_t hit = 0;
    for (const auto& e : g.edges()) hit += truth.count({e.src, e.dst});
    planted += truth.size();
    recovered += hit;
    inferred += g.edge_count();
    false_edges += g.edge_count() - hit;
    worst_recall = std::min(worst_recall, static_cast<double>(hit) / static_cast<double>(truth.size()));
    if (g.edge_count() > 0)
      worst_false = std::max(worst_false, static_cast<double>(g.edge_count() - hit) /
                                              static_cast<double>(g.edge_count()));
  }
  const double recall = static_cast<double>(recovered) / static_cast<double>(planted);
  const double false_rate = inferred ? static_cast<double>(false_edges) / static_cast<double>(inferred) : 0.0;
  return {worst_recall >= 0.90 && worst_false <= 0.05,
          "recall " + fmt(recall) + " (worst seed " + fmt(worst_recall) + "), false-edge share " + fmt(false_rate) +
              " (worst seed " + fmt(worst_false) + ") over 20 seeds"};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--cli" && i + 1 < argc) {
      cli = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance [--cli PATH] [--only N[,N...]]\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"spectral equivalence", spectral_equivalence},
      {"chebyshev eigenbasis oracle", chebyshev_oracle},
      {"K-hop locality on paths", path_locality},
      {"complexity trend", complexity_trend},
      {"finite-difference gradients", gradient_sweep},
      {"hierarchy shapes", hierarchy_shapes},
      {"empty-graph permutation commutation", empty_graph_permutation},
      {"synthetic end-to-end ablation", synthetic_end_to_end},
      {"protocol fidelity", [&] { return protocol_fidelity(cli); }},
      {"graph inference recovery", inference_recovery},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome out;
    const auto start = Clock::now();
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    failed += !out.pass;
    std::cout << (out.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": " << out.detail
              << " [" << fmt(seconds_since(start), 3) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
