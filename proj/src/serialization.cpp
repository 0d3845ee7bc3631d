#include "petnet/serialization.hpp"

#include "petnet/error.hpp"

#include <fstream>

namespace petnet {

namespace {

template <class T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("config key '") + key + "': " + e.what());
  }
}

json matrix_json(const Eigen::Ref<const Matrix>& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

template <class M>
void matrix_from_json(const json& j, M& out, const std::string& name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  require(static_cast<Eigen::Index>(data.size()) == rows * cols, ErrorKind::Validation,
          "tensor " + name + " has " + std::to_string(data.size()) + " values for shape " +
              std::to_string(rows) + "x" + std::to_string(cols));
  out.resize(rows, cols);
  std::copy(data.begin(), data.end(), out.data());
}

}  // namespace

json default_config() {
  return {
      {"seed", 0},
      {"threshold", 0.7},
      {"laplacian", "normalized"},
      {"levels", 3},
      {"K", 25},
      {"conv_channels", {32, 64, 128}},
      {"fc_width", 128},
      {"dropout_keep", 0.5},
      {"epochs", 200},
      {"batch_size", 32},
      {"learning_rate", 1e-3},
      {"weight_decay", 5e-4},
      {"optimizer", "adam"},
      {"momentum", 0.9},
      {"folds", 5},
      {"repeats", 10},
      {"graph", "inferred"},
      {"jobs", 1},
      {"track_validation", true},
      {"n_nodes", 120},
      {"subjects_per_class", 50},
      {"n_classes", 2},
      {"block_sizes", {30, 30, 30, 30}},
      {"strength", 0.9},
      {"noise", 0.3},
      {"class_offset", 2.5},
      {"offsets", json::array()},
      {"bench_n", 512},
      {"bench_densities", {0.01, 0.02}},
      {"bench_min_seconds", 0.05},
      {"dense_limit", 2048},
  };
}

json resolve_config(const json& overrides) {
  require(overrides.is_object() || overrides.is_null(), ErrorKind::Config,
          "configuration must be a JSON object");
  json out = default_config();
  if (overrides.is_null()) return out;
  for (const auto& [key, value] : overrides.items()) {
    require(out.contains(key), ErrorKind::Config, "unknown configuration key '" + key + "'");
    const auto& def = out[key];
    const bool compatible = (def.is_number() && value.is_number()) ||
                            (def.is_string() && value.is_string()) ||
                            (def.is_boolean() && value.is_boolean()) ||
                            (def.is_array() && value.is_array());
    require(compatible, ErrorKind::Config,
            "configuration key '" + key + "' expects a " + def.type_name() + ", got " +
                value.type_name());
    out[key] = value;
  }
  // Validate every section eagerly so bad values surface before any work.
  network_config(out).validate();
  train_config(out).validate();
  cv_config(out).validate();
  synthetic_spec(out).validate();
  benchmark_config(out).validate();
  require(get<int>(out, "levels") >= 1, ErrorKind::Config, "levels must be at least 1");
  return out;
}

NetworkConfig network_config(const json& j) {
  NetworkConfig cfg;
  cfg.K = get<int>(j, "K");
  const auto ch = get<std::vector<int>>(j, "conv_channels");
  require(ch.size() == kConvLayers, ErrorKind::Config, "conv_channels needs exactly 3 entries");
  std::copy(ch.begin(), ch.end(), cfg.conv_channels.begin());
  cfg.fc_width = get<int>(j, "fc_width");
  cfg.n_classes = get<int>(j, "n_classes");
  cfg.dropout_keep = get<double>(j, "dropout_keep");
  cfg.laplacian_kind = parse_laplacian_kind(get<std::string>(j, "laplacian"));
  cfg.seed = get<std::uint64_t>(j, "seed");
  return cfg;
}

TrainConfig train_config(const json& j) {
  TrainConfig cfg;
  cfg.epochs = get<int>(j, "epochs");
  cfg.batch_size = get<int>(j, "batch_size");
  cfg.learning_rate = get<double>(j, "learning_rate");
  cfg.weight_decay = get<double>(j, "weight_decay");
  cfg.optimizer = parse_optimizer(get<std::string>(j, "optimizer"));
  cfg.momentum = get<double>(j, "momentum");
  cfg.seed = get<std::uint64_t>(j, "seed") + 1;
  return cfg;
}

CrossValidationConfig cv_config(const json& j) {
  CrossValidationConfig cfg;
  cfg.folds = get<int>(j, "folds");
  cfg.repeats = get<int>(j, "repeats");
  cfg.threshold = get<double>(j, "threshold");
  cfg.graph_mode = parse_graph_mode(get<std::string>(j, "graph"));
  cfg.jobs = get<int>(j, "jobs");
  cfg.seed = get<std::uint64_t>(j, "seed");
  cfg.track_validation = get<bool>(j, "track_validation");
  return cfg;
}

SyntheticSpec synthetic_spec(const json& j) {
  SyntheticSpec s;
  s.n_nodes = get<std::size_t>(j, "n_nodes");
  s.subjects_per_class = get<std::size_t>(j, "subjects_per_class");
  s.n_classes = get<int>(j, "n_classes");
  s.block_sizes = get<std::vector<std::size_t>>(j, "block_sizes");
  s.strength = get<double>(j, "strength");
  s.noise = get<double>(j, "noise");
  s.class_offset = get<double>(j, "class_offset");
  s.offsets = get<std::vector<std::vector<double>>>(j, "offsets");
  s.seed = get<std::uint64_t>(j, "seed");
  return s;
}

BenchmarkConfig benchmark_config(const json& j) {
  BenchmarkConfig b;
  b.n = get<std::size_t>(j, "bench_n");
  b.K = get<int>(j, "K");
  b.densities = get<std::vector<double>>(j, "bench_densities");
  b.seed = get<std::uint64_t>(j, "seed");
  b.dense_limit = get<std::size_t>(j, "dense_limit");
  b.min_seconds = get<double>(j, "bench_min_seconds");
  return b;
}

json to_json(const NetworkConfig& cfg) {
  return {{"K", cfg.K},
          {"conv_channels", cfg.conv_channels},
          {"fc_width", cfg.fc_width},
          {"n_classes", cfg.n_classes},
          {"dropout_keep", cfg.dropout_keep},
          {"laplacian", to_string(cfg.laplacian_kind)},
          {"seed", cfg.seed}};
}

json to_json(const SparseGraph& g) {
  json edges = json::array();
  for (const auto& e : g.edges()) edges.push_back({e.src, e.dst, e.weight});
  json fake = json::array();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.is_fake(i)) fake.push_back(i);
  return {{"size", g.size()}, {"edges", edges}, {"fake", fake}};
}

SparseGraph graph_from_json(const json& j) {
  const auto n = j.at("size").get<std::size_t>();
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges"))
    edges.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), e.at(2).get<double>()});
  std::vector<bool> fake;
  if (j.contains("fake") && !j.at("fake").empty()) {
    fake.assign(n, false);
    for (const auto& f : j.at("fake")) {
      const auto i = f.get<std::size_t>();
      require(i < n, ErrorKind::Validation, "fake node index out of range");
      fake[i] = true;
    }
  }
  return SparseGraph(n, std::move(edges), std::move(fake));
}

json to_json(const CoarseningHierarchy& h) {
  json sizes = json::array(), levels = json::array();
  for (const auto& g : h.levels) {
    sizes.push_back(g.size());
    levels.push_back(to_json(g));
  }
  return {{"original_size", h.original_size},
          {"level_sizes", sizes},
          {"fake_counts", h.fake_counts},
          {"perm", h.perm},
          {"levels", levels}};
}

CoarseningHierarchy hierarchy_from_json(const json& j) {
  CoarseningHierarchy h;
  h.original_size = j.at("original_size").get<std::size_t>();
  h.perm = j.at("perm").get<std::vector<std::size_t>>();
  h.fake_counts = j.at("fake_counts").get<std::vector<std::size_t>>();
  for (const auto& g : j.at("levels")) h.levels.push_back(graph_from_json(g));
  require(!h.levels.empty() && h.perm.size() == h.levels.front().size(), ErrorKind::Validation,
          "hierarchy permutation does not match level 0");
  for (std::size_t l = 0; l + 1 < h.levels.size(); ++l) {
    require(h.levels[l].size() == 2 * h.levels[l + 1].size(), ErrorKind::Validation,
            "hierarchy levels must halve exactly");
    std::vector<std::size_t> up(h.levels[l].size());
    for (std::size_t p = 0; p < up.size(); ++p) up[p] = p / 2;
    h.parent.push_back(std::move(up));
  }
  return h;
}

json to_json(const ExperimentReport& report, const std::vector<std::string>& subject_ids) {
  json runs = json::array();
  for (const auto& r : report.runs) {
    json curve = json::array();
    for (const auto& p : r.curve)
      curve.push_back({{"epoch", p.epoch},
                       {"train_loss", p.train_loss},
                       {"train_acc", p.train_acc},
                       {"val_acc", std::isfinite(p.val_acc) ? json(p.val_acc) : json(nullptr)}});
    std::vector<std::string> test;
    for (auto s : r.test_subjects) test.push_back(subject_ids.at(s));
    runs.push_back({{"repeat", r.repeat},
                    {"fold", r.fold},
                    {"accuracy", r.accuracy},
                    {"confusion", r.confusion},
                    {"graph_edges", r.graph_edges},
                    {"test_subjects", test},
                    {"curve", curve}});
  }
  return {{"format", "petnet-report"},
          {"version", kReportFormatVersion},
          {"graph_mode", report.graph_mode},
          {"folds", report.folds},
          {"repeats", report.repeats},
          {"class_names", report.class_names},
          {"mean", report.mean},
          {"std", report.stddev},
          {"runs", runs}};
}

json model_to_json(const ChebNetModel& m, const std::vector<std::string>& class_names) {
  json params = json::object();
  for (const auto& t : tensors(m.params)) params[t.name] = nullptr;
  for (std::size_t l = 0; l < kConvLayers; ++l) {
    params["conv" + std::to_string(l) + ".theta"] = matrix_json(m.params.conv_theta[l]);
    params["conv" + std::to_string(l) + ".bias"] = matrix_json(m.params.conv_bias[l]);
  }
  params["fc1.weight"] = matrix_json(m.params.fc1_weight);
  params["fc1.bias"] = matrix_json(m.params.fc1_bias);
  params["fc2.weight"] = matrix_json(m.params.fc2_weight);
  params["fc2.bias"] = matrix_json(m.params.fc2_bias);

  json lambdas = json::array();
  for (const auto& lap : m.laplacians) lambdas.push_back(lap.lambda_max.value_or(2.0));
  return {{"format", "petnet-model"},
          {"version", kModelFormatVersion},
          {"config", to_json(m.config)},
          {"class_names", class_names},
          {"hierarchy", to_json(m.hierarchy)},
          {"lambda_max", lambdas},
          {"parameters", params}};
}

ModelFile model_from_json(const json& j) {
  try {
    require(j.at("format") == "petnet-model", ErrorKind::Validation, "not a petnet model file");
    const int version = j.at("version").get<int>();
    require(version == kModelFormatVersion, ErrorKind::Validation,
            "unsupported model format version " + std::to_string(version));

    ModelFile f;
    auto& m = f.model;
    const auto& c = j.at("config");
    m.config.K = c.at("K").get<int>();
    m.config.conv_channels = c.at("conv_channels").get<std::array<int, kConvLayers>>();
    m.config.fc_width = c.at("fc_width").get<int>();
    m.config.n_classes = c.at("n_classes").get<int>();
    m.config.dropout_keep = c.at("dropout_keep").get<double>();
    m.config.laplacian_kind = parse_laplacian_kind(c.at("laplacian").get<std::string>());
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.config.validate();
    f.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.hierarchy = hierarchy_from_json(j.at("hierarchy"));
    require(m.hierarchy.depth() >= kConvLayers, ErrorKind::Validation,
            "model hierarchy is too shallow");

    const auto lambdas = j.at("lambda_max").get<std::vector<double>>();
    require(lambdas.size() == kConvLayers, ErrorKind::Validation, "expected 3 lambda_max values");
    for (std::size_t l = 0; l < kConvLayers; ++l)
      m.laplacians[l] = rescale(laplacian(m.hierarchy.levels[l], m.config.laplacian_kind), lambdas[l]);

    const auto& p = j.at("parameters");
    for (std::size_t l = 0; l < kConvLayers; ++l) {
      const auto base = "conv" + std::to_string(l);
      matrix_from_json(p.at(base + ".theta"), m.params.conv_theta[l], base + ".theta");
      matrix_from_json(p.at(base + ".bias"), m.params.conv_bias[l], base + ".bias");
    }
    matrix_from_json(p.at("fc1.weight"), m.params.fc1_weight, "fc1.weight");
    matrix_from_json(p.at("fc1.bias"), m.params.fc1_bias, "fc1.bias");
    matrix_from_json(p.at("fc2.weight"), m.params.fc2_weight, "fc2.weight");
    matrix_from_json(p.at("fc2.bias"), m.params.fc2_bias, "fc2.bias");

    // Shape chain check against a freshly initialized model.
    const auto expected = init_model(m.config, m.hierarchy);
    const auto want = tensors(expected.params);
    const auto have = tensors(m.params);
    for (std::size_t k = 0; k < want.size(); ++k)
      require(want[k].data.size() == have[k].data.size(), ErrorKind::Validation,
              "tensor " + want[k].name + " has the wrong shape");
    return f;
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const ModelFile& f, const std::filesystem::path& path) {
  write_json_file(model_to_json(f.model, f.class_names), path);
}

ModelFile load_model(const std::filesystem::path& path) {
  return model_from_json(read_json_file(path));
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, path.string() + ": " + e.what());
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace petnet
