#include "petnet/error.hpp"
#include "petnet/io.hpp"
#include "petnet/serialization.hpp"
#include "petnet/synthetic.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <fstream>
#include <limits>
#include <random>
#include <utility>

using namespace petnet;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string error_of(const std::function<void()>& fn, ErrorKind* kind = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (kind) *kind = e.kind();
    return e.what();
  }
  return {};
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("signal CSV layouts") {
  const auto dir = test::scratch_dir("io_layouts");
  write_text(dir / "plain.csv", "1,2,3\n4,5,6\n");
  const auto plain = load_signals(dir / "plain.csv");
  CHECK(plain.n_nodes() == 2);
  CHECK(plain.n_subjects() == 3);
  CHECK(plain.values(1, 2) == 6.0);

  write_text(dir / "full.csv", "node,a,b\nroiA,1.5,-2\nroiB,3,4e-3\n");
  const auto full = load_signals(dir / "full.csv");
  CHECK(full.node_ids == std::vector<std::string>{"roiA", "roiB"});
  CHECK(full.subject_ids == std::vector<std::string>{"a", "b"});
  CHECK(full.values(1, 1) == 4e-3);

  write_text(dir / "rowlabels.csv", "roiA,1,2\nroiB,3,4\n");
  const auto rl = load_signals(dir / "rowlabels.csv");
  CHECK(rl.node_ids[1] == "roiB");
  CHECK(rl.n_subjects() == 2);
}

TEST_CASE("signal CSV errors carry coordinates") {
  const auto dir = test::scratch_dir("io_errors");
  ErrorKind kind{};
  write_text(dir / "nan.csv", "node,a,b\nr0,1,NaN\nr1,2,3\n");
  auto msg = error_of([&] { load_signals(dir / "nan.csv"); }, &kind);
  CHECK(kind == ErrorKind::Validation);
  CHECK(contains(msg, "line 2"));
  CHECK(contains(msg, "column 3"));

  write_text(dir / "text.csv", "node,a,b\nr0,1,2\nr1,x,3\n");
  msg = error_of([&] { load_signals(dir / "text.csv"); }, &kind);
  CHECK(kind == ErrorKind::Validation);
  CHECK(contains(msg, "line 3"));
  CHECK(contains(msg, "column 2"));

  write_text(dir / "ragged.csv", "1,2,3\n4,5\n");
  error_of([&] { load_signals(dir / "ragged.csv"); }, &kind);
  CHECK(kind == ErrorKind::Dimension);

  error_of([&] { load_signals(dir / "missing.csv"); }, &kind);
  CHECK(kind == ErrorKind::Io);
}

TEST_CASE("labels file validation") {
  const auto dir = test::scratch_dir("io_labels");
  write_text(dir / "s.csv", "node,s1,s2,s3\nr0,1,2,3\nr1,2,2,1\n");
  write_text(dir / "ok.csv", "subject_id,label\ns3,MCI\ns1,NC\ns2,MCI\n");
  const auto ds = load_dataset(dir / "s.csv", dir / "ok.csv");
  CHECK(ds.class_names == std::vector<std::string>{"MCI", "NC"});
  CHECK(ds.labels == std::vector<int>{1, 0, 0});

  write_text(dir / "short.csv", "subject_id,label\ns1,NC\ns2,MCI\n");
  ErrorKind kind{};
  auto msg = error_of([&] { load_dataset(dir / "s.csv", dir / "short.csv"); }, &kind);
  CHECK(kind == ErrorKind::Dimension);
  CHECK(contains(msg, "3 subjects"));
  CHECK(contains(msg, "2 labels"));

  write_text(dir / "dup.csv", "subject_id,label\ns1,NC\ns1,MCI\ns2,NC\n");
  msg = error_of([&] { load_dataset(dir / "s.csv", dir / "dup.csv"); }, &kind);
  CHECK(kind == ErrorKind::Validation);
  CHECK(contains(msg, "duplicate"));

  write_text(dir / "unknown.csv", "subject_id,label\ns1,NC\ns2,AD\ns3,NC\n");
  const std::vector<std::string> known{"NC", "MCI"};
  msg = error_of([&] { load_dataset(dir / "s.csv", dir / "unknown.csv", known); }, &kind);
  CHECK(kind == ErrorKind::Validation);
  CHECK(contains(msg, "AD"));

  write_text(dir / "header.csv", "id,label\ns1,NC\ns2,NC\ns3,NC\n");
  CHECK_THROWS_AS(load_dataset(dir / "s.csv", dir / "header.csv"), Error);
}

TEST_CASE("a 120 x 327 matrix loads with matching labels") {
  const auto dir = test::scratch_dir("io_adni_shape");
  SyntheticSpec spec;
  spec.subjects_per_class = 109;
  spec.n_classes = 3;
  auto ds = generate_synthetic(spec).dataset;
  CHECK(ds.n_subjects() == 327);
  write_dataset(ds, dir / "s.csv", dir / "l.csv");
  const auto back = load_dataset(dir / "s.csv", dir / "l.csv");
  CHECK(back.n_nodes() == 120);
  CHECK(back.n_subjects() == 327);

  // drop the last label
  std::ifstream in(dir / "l.csv");
  std::string text, line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) text += lines[i] + "\n";
  write_text(dir / "l326.csv", text);
  const auto msg = error_of([&] { load_dataset(dir / "s.csv", dir / "l326.csv"); });
  CHECK(contains(msg, "327"));
  CHECK(contains(msg, "326"));
}

TEST_CASE("dataset round trip is exact") {
  const auto dir = test::scratch_dir("io_roundtrip");
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1e3);
  Matrix v(5, 7);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = g(rng) * std::pow(10.0, (i % 11) - 5);
  v(0, 0) = std::numeric_limits<double>::denorm_min();
  v(1, 1) = -0.0;
  Dataset ds;
  ds.signals = SignalMatrix(v);
  ds.labels = {0, 1, 0, 1, 1, 0, 1};
  ds.class_names = {"a", "b"};
  write_dataset(ds, dir / "s.csv", dir / "l.csv");
  const auto back = load_dataset(dir / "s.csv", dir / "l.csv");
  CHECK(back.signals.values == ds.signals.values);
  CHECK(back.labels == ds.labels);
  CHECK(back.class_names == ds.class_names);
  CHECK(back.signals.node_ids == ds.signals.node_ids);
  CHECK(back.signals.subject_ids == ds.signals.subject_ids);
}

TEST_CASE("edge list round trip") {
  const auto dir = test::scratch_dir("io_edges");
  std::mt19937_64 rng(2);
  const auto g = test::random_graph(rng, 12, 0.3);
  write_edge_list(g, dir / "g.csv");
  CHECK(read_edge_list(dir / "g.csv", 12) == g);
  write_text(dir / "bad.csv", "src,dst,weight\n0,1.5,1\n");
  CHECK_THROWS_AS(read_edge_list(dir / "bad.csv"), Error);
  write_dense_adjacency(g, dir / "dense.csv");
  CHECK(fs::file_size(dir / "dense.csv") > 0);
}

TEST_CASE("file digest") {
  const auto dir = test::scratch_dir("io_digest");
  write_text(dir / "abc.txt", "abc");
  CHECK(file_digest(dir / "abc.txt") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("format_double round trips") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, i % 40 - 20);
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("synthetic generator") {
  SyntheticSpec spec;
  spec.strength = 1.0;
  spec.noise = 1e-9;
  spec.class_offset = 0.0;
  spec.subjects_per_class = 20;
  const auto data = generate_synthetic(spec);
  const auto c = pearson_correlation(data.dataset.signals);
  CHECK(c.values(0, 29) > 0.999999);
  CHECK(std::abs(c.values(0, 30)) < 0.9);
  CHECK(data.ground_truth.edge_count() == 4 * 435);

  SyntheticSpec a;
  a.seed = 5;
  CHECK(generate_synthetic(a).dataset.signals.values == generate_synthetic(a).dataset.signals.values);

  SyntheticSpec bad;
  bad.block_sizes = {30, 30};
  CHECK_THROWS_AS(generate_synthetic(bad), Error);
}

TEST_CASE("config resolution") {
  const auto defaults = default_config();
  CHECK(resolve_config(json::object()) == defaults);
  const auto r = resolve_config({{"K", 10}, {"graph", "empty"}});
  CHECK(network_config(r).K == 10);
  CHECK(cv_config(r).graph_mode == GraphMode::Empty);

  ErrorKind kind{};
  error_of([&] { resolve_config({{"bogus", 1}}); }, &kind);
  CHECK(kind == ErrorKind::Config);
  error_of([&] { resolve_config({{"K", "ten"}}); }, &kind);
  CHECK(kind == ErrorKind::Config);
  error_of([&] { resolve_config({{"K", 0}}); }, &kind);
  CHECK(kind == ErrorKind::Config);
}

TEST_CASE("model file round trip is bit-exact") {
  const auto dir = test::scratch_dir("io_model");
  std::mt19937_64 rng(4);
  NetworkConfig cfg;
  cfg.K = 4;
  cfg.conv_channels = {3, 4, 5};
  cfg.fc_width = 6;
  cfg.n_classes = 3;
  cfg.seed = 77;
  const auto g = test::random_graph(rng, 20, 0.2);
  ModelFile f{init_model(cfg, build_hierarchy(g, 3, 5)), {"x", "y", "z"}};
  save_model(f, dir / "m.json");
  const auto back = load_model(dir / "m.json");
  CHECK(back.class_names == f.class_names);
  const auto a = tensors(std::as_const(f.model.params));
  const auto b = tensors(back.model.params);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].name == b[k].name);
    CHECK(std::equal(a[k].data.begin(), a[k].data.end(), b[k].data.begin(), b[k].data.end()));
  }
  for (std::size_t l = 0; l < kConvLayers; ++l) {
    CHECK(back.model.laplacians[l].lambda_max == f.model.laplacians[l].lambda_max);
    CHECK(Eigen::MatrixXd(back.model.laplacians[l].entries) == Eigen::MatrixXd(f.model.laplacians[l].entries));
  }
  Matrix x(4, 20);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = std::normal_distribution<double>()(rng);
  CHECK(forward(back.model, x, false).probs == forward(f.model, x, false).probs);

  auto j = model_to_json(f.model, f.class_names);
  j["version"] = 99;
  CHECK_THROWS_AS(model_from_json(j), Error);
  j = model_to_json(f.model, f.class_names);
  j["parameters"]["fc1.weight"]["data"].erase(0);
  CHECK_THROWS_AS(model_from_json(j), Error);
}

TEST_CASE("hierarchy json round trip") {
  std::mt19937_64 rng(5);
  const auto h = build_hierarchy(test::random_graph(rng, 25, 0.1), 3, 1);
  const auto back = hierarchy_from_json(to_json(h));
  CHECK(back.perm == h.perm);
  CHECK(back.levels == h.levels);
  CHECK(back.parent == h.parent);
  CHECK(back.fake_counts == h.fake_counts);
}
