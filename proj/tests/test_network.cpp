#include "petnet/error.hpp"
#include "petnet/network.hpp"
#include "petnet/training.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace petnet;
using petnet::test::hierarchical_graph;
using petnet::test::random_graph;

namespace {

Matrix random_batch(std::mt19937_64& rng, Eigen::Index batch, Eigen::Index nodes) {
  std::normal_distribution<double> g;
  Matrix x(batch, nodes);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  return x;
}

ChebNetModel tiny_model(std::uint64_t seed, double keep = 1.0) {
  std::mt19937_64 rng(seed);
  const auto g = random_graph(rng, 8, 0.4);
  NetworkConfig cfg;
  cfg.K = 3;
  cfg.conv_channels = {2, 2, 2};
  cfg.fc_width = 4;
  cfg.n_classes = 2;
  cfg.dropout_keep = keep;
  cfg.seed = seed;
  return init_model(cfg, build_hierarchy(g, 3, seed));
}

// Zero biases put fake nodes exactly on the rectifier kink, where central
// differences are meaningless. Small positive biases move every unit off it.
ChebNetModel jittered_model(std::uint64_t seed, double keep = 1.0) {
  auto m = tiny_model(seed, keep);
  std::mt19937_64 rng(seed + 1000);
  std::uniform_real_distribution<double> u(0.05, 0.25);
  for (auto& t : tensors(m.params))
    if (t.is_bias)
      for (auto& v : t.data) v = u(rng);
  return m;
}

double batch_loss(const ChebNetModel& m, const Matrix& x, const std::vector<int>& labels,
                  std::uint64_t mask_seed) {
  std::mt19937_64 rng(mask_seed);
  return cross_entropy_loss(forward(m, x, true, &rng).probs, labels);
}

}  // namespace

TEST_CASE("parameter count of the default configuration") {
  const auto h = build_hierarchy(hierarchical_graph(120), 3, 0);
  CHECK(h.level_size(3) == 15);
  NetworkConfig cfg;
  cfg.n_classes = 3;
  const auto m = init_model(cfg, h);
  CHECK(m.parameter_count() == 503299);
  CHECK(m.params.fc1_weight.rows() == 15 * 128);
}

TEST_CASE("init is seeded and biases start at zero") {
  const auto a = tiny_model(4), b = tiny_model(4);
  const auto ta = tensors(a.params), tb = tensors(b.params);
  REQUIRE(ta.size() == 10);
  for (std::size_t k = 0; k < ta.size(); ++k) {
    CHECK(std::equal(ta[k].data.begin(), ta[k].data.end(), tb[k].data.begin()));
    if (ta[k].is_bias)
      CHECK(std::all_of(ta[k].data.begin(), ta[k].data.end(), [](double v) { return v == 0.0; }));
  }
  NetworkConfig cfg;
  CHECK_THROWS_AS(init_model(cfg, build_hierarchy(hierarchical_graph(16), 2, 0)), Error);
  try {
    init_model(cfg, build_hierarchy(hierarchical_graph(16), 2, 0));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}

TEST_CASE("forward produces normalized probabilities") {
  auto m = tiny_model(1);
  std::mt19937_64 rng(2);
  const auto x = random_batch(rng, 5, 8);
  const auto probs = forward(m, x, false).probs;
  CHECK(probs.rows() == 5);
  CHECK(probs.cols() == 2);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) CHECK(std::abs(probs.row(i).sum() - 1.0) <= 1e-9);
  CHECK_FALSE(forward(m, x, false).cache.has_value());
  CHECK(forward(m, x, true, &rng).cache.has_value());
  CHECK_THROWS_AS(forward(m, random_batch(rng, 2, 7), false), Error);
  CHECK(predict(m, x) == predict(m, x));
}

TEST_CASE("zero input yields one probability vector for every sample") {
  auto m = tiny_model(3);
  for (auto& t : tensors(m.params))
    if (t.is_bias)
      for (std::size_t k = 0; k < t.data.size(); ++k) t.data[k] = 0.1 * static_cast<double>(k + 1);
  const auto probs = forward(m, Matrix::Zero(4, 8), false).probs;
  for (Eigen::Index i = 1; i < 4; ++i) CHECK(probs.row(i) == probs.row(0));
}

TEST_CASE("argmax ties go to the lowest index") {
  Matrix p(2, 3);
  p << 0.2, 0.5, 0.3, 0.4, 0.4, 0.2;
  CHECK(argmax_rows(p) == std::vector<int>{1, 0});
  Matrix tie(1, 2);
  tie << 0.5, 0.5;
  CHECK(argmax_rows(tie) == std::vector<int>{0});
}

TEST_CASE("finite-difference gradient sweep on the tiny model") {
  for (double keep : {1.0, 0.6}) {
    CAPTURE(keep);
    auto m = jittered_model(11, keep);
    std::mt19937_64 rng(12);
    const auto x = random_batch(rng, 6, 8);
    const std::vector<int> labels{0, 1, 1, 0, 1, 0};
    const std::uint64_t mask_seed = 13;

    std::mt19937_64 mask_rng(mask_seed);
    const auto fwd = forward(m, x, true, &mask_rng);
    const auto grads = backward(m, *fwd.cache, labels);

    const double eps = 1e-5;
    auto params = tensors(m.params);
    const auto analytic = tensors(grads);
    std::size_t checked = 0;
    double worst = 0.0;
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t k = 0; k < params[t].data.size(); ++k) {
        const double saved = params[t].data[k];
        params[t].data[k] = saved + eps;
        const double up = batch_loss(m, x, labels, mask_seed);
        params[t].data[k] = saved - eps;
        const double down = batch_loss(m, x, labels, mask_seed);
        params[t].data[k] = saved;
        const double numeric = (up - down) / (2 * eps);
        const double a = analytic[t].data[k];
        if (std::abs(a) <= 1e-8) continue;
        const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
        worst = std::max(worst, rel);
        CHECK_MESSAGE(rel <= 1e-4, params[t].name << "[" << k << "] analytic " << a << " numeric "
                                                  << numeric);
        ++checked;
      }
    }
    CHECK(checked > 20);
    MESSAGE("keep " << keep << ": " << checked << " gradients, worst relative error " << worst);
  }
}

TEST_CASE("fc2 bias gradient is the mean softmax residual") {
  auto m = jittered_model(21);
  std::mt19937_64 rng(22);
  const auto x = random_batch(rng, 5, 8);
  const std::vector<int> labels{1, 0, 0, 1, 1};
  const auto fwd = forward(m, x, true, &rng);
  const auto grads = backward(m, *fwd.cache, labels);
  Matrix residual = fwd.probs;
  for (std::size_t i = 0; i < labels.size(); ++i) residual(static_cast<Eigen::Index>(i), labels[i]) -= 1.0;
  const RowVector want = residual.colwise().mean();
  CHECK((grads.fc2_bias - want).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("duplicating the batch leaves gradients unchanged") {
  auto m = jittered_model(31);
  std::mt19937_64 rng(32);
  const auto x = random_batch(rng, 3, 8);
  const std::vector<int> labels{0, 1, 0};
  Matrix twice(6, 8);
  twice << x, x;
  const std::vector<int> labels2{0, 1, 0, 0, 1, 0};
  const auto g1 = backward(m, *forward(m, x, true, &rng).cache, labels);
  const auto g2 = backward(m, *forward(m, twice, true, &rng).cache, labels2);
  const auto t1 = tensors(g1), t2 = tensors(g2);
  for (std::size_t t = 0; t < t1.size(); ++t)
    for (std::size_t k = 0; k < t1[t].data.size(); ++k)
      CHECK(t1[t].data[k] == doctest::Approx(t2[t].data[k]).epsilon(1e-10));
}

TEST_CASE("stale caches are rejected") {
  auto m = tiny_model(41);
  std::mt19937_64 rng(42);
  const auto x = random_batch(rng, 2, 8);
  const auto fwd = forward(m, x, true, &rng);
  ++m.revision;
  const std::vector<int> labels{0, 1};
  try {
    backward(m, *fwd.cache, labels);
    FAIL("expected a contract error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Contract);
  }
  CHECK_THROWS_AS(backward(m, ForwardCache{}, labels), Error);
}

TEST_CASE("inverted dropout preserves the expected activation") {
  auto m = jittered_model(51, 0.5);
  std::mt19937_64 rng(52);
  const auto x = random_batch(rng, 4, 8);
  Matrix sum;
  Matrix inference;
  const int draws = 2000;
  for (int d = 0; d < draws; ++d) {
    const auto fwd = forward(m, x, true, &rng);
    if (d == 0) {
      sum = Matrix::Zero(fwd.cache->fc1_out.rows(), fwd.cache->fc1_out.cols());
      inference = fwd.cache->fc1_pre.cwiseMax(0.0);
    }
    sum += fwd.cache->fc1_out;
  }
  const Matrix mean = sum / draws;
  REQUIRE(inference.sum() > 0.0);
  CHECK(std::abs(mean.sum() - inference.sum()) / inference.sum() <= 0.05);
}

TEST_CASE("empty graph conv stack commutes with node permutations") {
  NetworkConfig cfg;
  cfg.K = 4;
  cfg.conv_channels = {3, 3, 3};
  cfg.fc_width = 4;
  const auto h = build_hierarchy(SparseGraph(10), 3, 0);
  const auto m = init_model(cfg, h);
  std::mt19937_64 rng(61);
  const auto x = random_batch(rng, 2, 10);
  const auto base = conv_stack(m, x);
  const auto inv = h.inverse_perm();
  std::vector<Eigen::Index> order(10);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Matrix xp(2, 10);
  for (Eigen::Index i = 0; i < 10; ++i) xp.col(i) = x.col(order[static_cast<std::size_t>(i)]);
  const auto moved = conv_stack(m, xp);
  // node i of xp carries original node order[i]; each real node keeps its own slot after 3 poolings
  for (Eigen::Index i = 0; i < 10; ++i)
    CHECK(moved.row(static_cast<Eigen::Index>(inv[static_cast<std::size_t>(i)] >> 3)) ==
          base.row(static_cast<Eigen::Index>(inv[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] >> 3)));
}
