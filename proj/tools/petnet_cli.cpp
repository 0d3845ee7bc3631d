#include "petnet/petnet.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

// Thrown by command bodies; carries the exit code.
struct Failure {
  int code;
  std::string message;
};

[[noreturn]] void invalid(const std::string& msg) { throw Failure{kExitInvalid, msg}; }

void check(pn_status st) {
  if (st == PN_OK) return;
  const bool user_error = st == PN_ERR_VALIDATION || st == PN_ERR_DIMENSION || st == PN_ERR_CONFIG ||
                          st == PN_ERR_DOMAIN || st == PN_ERR_CAPABILITY || st == PN_ERR_ARGUMENT;
  throw Failure{user_error ? kExitInvalid : kExitRuntime,
                std::string(pn_status_name(st)) + " error: " + pn_last_error()};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Dataset = std::unique_ptr<pn_dataset, Deleter<pn_dataset, pn_dataset_free>>;
using Graph = std::unique_ptr<pn_graph, Deleter<pn_graph, pn_graph_free>>;
using Hierarchy = std::unique_ptr<pn_hierarchy, Deleter<pn_hierarchy, pn_hierarchy_free>>;
using Model = std::unique_ptr<pn_model, Deleter<pn_model, pn_model_free>>;

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string digest(const fs::path& p) {
  char hex[65];
  check(pn_file_digest(p.c_str(), hex));
  return hex;
}

enum class Kind { Int, Real, Str, Bool, IntList, RealList };

json convert(const std::string& text, Kind kind) {
  auto split = [&] {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) parts.push_back(item);
    return parts;
  };
  try {
    switch (kind) {
      case Kind::Int: {
        std::size_t used = 0;
        const long long v = std::stoll(text, &used);
        if (used != text.size()) break;
        return v;
      }
      case Kind::Real: {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size() || !std::isfinite(v)) break;
        return v;
      }
      case Kind::Str: return text;
      case Kind::Bool:
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        break;
      case Kind::IntList: {
        json out = json::array();
        for (const auto& p : split()) out.push_back(convert(p, Kind::Int));
        return out;
      }
      case Kind::RealList: {
        json out = json::array();
        for (const auto& p : split()) out.push_back(convert(p, Kind::Real));
        return out;
      }
    }
  } catch (const CLI::ValidationError&) {
    throw;
  } catch (const std::exception&) {
  }
  throw CLI::ValidationError("cannot parse '" + text + "'");
}

struct Command {
  CLI::App* app = nullptr;
  std::string name;
  std::string config_path;
  std::string out_dir;
  bool force = false;
  json overrides = json::object();
  std::map<std::string, std::string> inputs;  // role -> path given on the command line
  std::vector<std::string> settings;          // raw key=value pairs

  void key(const std::string& flags, const std::string& cfg_key, Kind kind, const std::string& help) {
    app->add_option_function<std::string>(
        flags, [this, cfg_key, kind](const std::string& v) { overrides[cfg_key] = convert(v, kind); },
        help);
  }

  void input(const std::string& flag, const std::string& role, const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, role](const std::string& v) { inputs[role] = v; }, help);
  }
};

void init_command(Command& c, CLI::App& root, const std::string& name,
                  const std::string& description) {
  c.name = name;
  c.app = root.add_subcommand(name, description);
  c.app->add_option("--config", c.config_path,
                    "flat JSON config or a previous run's manifest.json");
  c.app->add_option("--out", c.out_dir, "output directory (default $PETNET_OUTPUT_ROOT/<command>)");
  c.app->add_flag("--force", c.force, "write into a non-empty output directory");
}

// Callbacks capture `this`, so commands live in stable storage before options are added.
void add_seed(Command& c) { c.key("--seed", "seed", Kind::Int, "master seed"); }

void add_set(Command& c) {
  c.app->add_option("--set", c.settings, "generic override key=value (JSON value)")->take_all();
}

void add_network_flags(Command& c) {
  c.key("--k,--K", "K", Kind::Int, "Chebyshev order");
  c.key("--channels", "conv_channels", Kind::IntList, "three conv widths, comma separated");
  c.key("--fc", "fc_width", Kind::Int, "hidden fully connected width");
  c.key("--dropout-keep", "dropout_keep", Kind::Real, "dropout keep probability");
  c.key("--laplacian", "laplacian", Kind::Str, "normalized or combinatorial");
  c.key("--epochs", "epochs", Kind::Int, "training epochs");
  c.key("--batch-size", "batch_size", Kind::Int, "mini-batch size");
  c.key("--lr", "learning_rate", Kind::Real, "learning rate");
  c.key("--weight-decay", "weight_decay", Kind::Real, "decoupled weight decay");
  c.key("--optimizer", "optimizer", Kind::Str, "adam or sgd_momentum");
  c.key("--momentum", "momentum", Kind::Real, "momentum for sgd_momentum");
}

struct Context {
  json config;                   // resolved
  json manifest_inputs;          // from a manifest passed as --config
  json inputs = json::object();  // role -> {path, sha256}
  fs::path out;
  std::string started;
};

fs::path default_out(const std::string& command) {
  const char* root = std::getenv("PETNET_OUTPUT_ROOT");
  return fs::path(root && *root ? root : "petnet-out") / command;
}

Context prepare(Command& c) {
  Context ctx;
  ctx.started = utc_now();
  json base = json::object();
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) invalid("cannot open config " + c.config_path);
    try {
      base = json::parse(in);
    } catch (const json::exception& e) {
      invalid("config " + c.config_path + ": " + e.what());
    }
    if (!base.is_object()) invalid("config must be a JSON object");
    if (base.value("format", "") == "petnet-manifest") {
      ctx.manifest_inputs = base.value("inputs", json::object());
      base = base.at("config");
    }
  }
  for (const auto& s : c.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) invalid("--set expects key=value, got '" + s + "'");
    const auto key = s.substr(0, eq), text = s.substr(eq + 1);
    try {
      base[key] = json::parse(text);
    } catch (const json::exception&) {
      base[key] = text;
    }
  }
  base.update(c.overrides);

  char* text = nullptr;
  check(pn_config_resolve(base.dump().c_str(), &text));
  ctx.config = json::parse(text);
  pn_string_free(text);

  ctx.out = c.out_dir.empty() ? default_out(c.name) : fs::path(c.out_dir);
  if (fs::exists(ctx.out)) {
    if (!fs::is_directory(ctx.out)) invalid(ctx.out.string() + " exists and is not a directory");
    if (!fs::is_empty(ctx.out) && !c.force)
      invalid("output directory " + ctx.out.string() + " is not empty (use --force)");
  }
  fs::create_directories(ctx.out);
  return ctx;
}

// Resolves an input path from the flags or, failing that, the manifest; records its digest.
std::string input(Command& c, Context& ctx, const std::string& role, bool required) {
  std::string path;
  std::string expected;
  if (auto it = c.inputs.find(role); it != c.inputs.end()) {
    path = it->second;
  } else if (ctx.manifest_inputs.contains(role)) {
    path = ctx.manifest_inputs[role].at("path").get<std::string>();
    expected = ctx.manifest_inputs[role].at("sha256").get<std::string>();
  }
  if (path.empty()) {
    if (required) invalid("missing required input --" + role);
    return {};
  }
  if (!fs::is_regular_file(path)) invalid("input file not found: " + path);
  const auto sha = digest(path);
  if (!expected.empty() && sha != expected)
    invalid("input " + path + " does not match the manifest digest");
  ctx.inputs[role] = {{"path", fs::absolute(path).lexically_normal().string()}, {"sha256", sha}};
  return path;
}

void finish(const Command& c, const Context& ctx, const std::vector<std::string>& argv) {
  json outputs = json::object();
  for (const auto& entry : fs::recursive_directory_iterator(ctx.out)) {
    if (!entry.is_regular_file() || entry.path().filename() == "manifest.json") continue;
    outputs[fs::relative(entry.path(), ctx.out).string()] = digest(entry.path());
  }
  json manifest = {{"format", "petnet-manifest"},
                   {"version", 1},
                   {"toolkit_version", pn_version()},
                   {"command", c.name},
                   {"argv", argv},
                   {"seed", ctx.config.at("seed")},
                   {"config", ctx.config},
                   {"inputs", ctx.inputs},
                   {"outputs", outputs},
                   {"started_at", ctx.started},
                   {"finished_at", utc_now()}};
  std::ofstream out(ctx.out / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw Failure{kExitRuntime, "failed writing manifest"};
}

std::string path_in(const Context& ctx, const std::string& file) { return (ctx.out / file).string(); }

Dataset load_labeled(Command& c, Context& ctx) {
  const auto signals = input(c, ctx, "signals", true);
  const auto labels = input(c, ctx, "labels", true);
  pn_dataset* ds = nullptr;
  check(pn_dataset_load(signals.c_str(), labels.c_str(), &ds));
  return Dataset(ds);
}

// Graph from --graph, or inferred from the signals at the configured threshold.
Graph training_graph(Command& c, Context& ctx, const pn_dataset* ds) {
  const auto graph_path = input(c, ctx, "graph", false);
  pn_graph* g = nullptr;
  if (!graph_path.empty())
    check(pn_graph_load(graph_path.c_str(), pn_dataset_nodes(ds), &g));
  else
    check(pn_graph_infer(ds, ctx.config.at("threshold").get<double>(), &g));
  return Graph(g);
}

void run_infer_graph(Command& c, Context& ctx, bool dense) {
  const auto signals = input(c, ctx, "signals", true);
  pn_dataset* raw = nullptr;
  check(pn_dataset_load_signals(signals.c_str(), &raw));
  Dataset ds(raw);
  pn_graph* g = nullptr;
  check(pn_graph_infer(ds.get(), ctx.config.at("threshold").get<double>(), &g));
  Graph graph(g);
  check(pn_graph_save_edges(graph.get(), path_in(ctx, "graph.csv").c_str()));
  if (dense) check(pn_graph_save_dense(graph.get(), path_in(ctx, "adjacency.csv").c_str()));
  std::cout << "nodes " << pn_graph_nodes(graph.get()) << ", edges " << pn_graph_edges(graph.get())
            << '\n';
}

void run_coarsen(Command& c, Context& ctx, std::size_t n_nodes) {
  const auto graph_path = input(c, ctx, "graph", false);
  pn_graph* g = nullptr;
  if (!graph_path.empty()) {
    check(pn_graph_load(graph_path.c_str(), n_nodes, &g));
  } else {
    const auto signals = input(c, ctx, "signals", false);
    if (signals.empty()) invalid("coarsen needs --graph or --signals");
    pn_dataset* raw = nullptr;
    check(pn_dataset_load_signals(signals.c_str(), &raw));
    Dataset ds(raw);
    check(pn_graph_infer(ds.get(), ctx.config.at("threshold").get<double>(), &g));
  }
  Graph graph(g);
  pn_hierarchy* h = nullptr;
  check(pn_hierarchy_build(graph.get(), ctx.config.at("levels").get<int>(),
                           ctx.config.at("seed").get<std::uint64_t>(), &h));
  Hierarchy hier(h);
  check(pn_hierarchy_save_json(hier.get(), path_in(ctx, "hierarchy.json").c_str()));
  std::cout << "level sizes";
  for (std::size_t l = 0; l < pn_hierarchy_levels(hier.get()); ++l)
    std::cout << ' ' << pn_hierarchy_level_size(hier.get(), l);
  std::cout << '\n';
}

void run_train(Command& c, Context& ctx) {
  auto ds = load_labeled(c, ctx);
  auto graph = training_graph(c, ctx, ds.get());
  check(pn_graph_save_edges(graph.get(), path_in(ctx, "graph.csv").c_str()));
  pn_model* m = nullptr;
  check(pn_model_train(ds.get(), graph.get(), ctx.config.dump().c_str(), &m,
                       path_in(ctx, "curve.csv").c_str()));
  Model model(m);
  check(pn_model_save(model.get(), path_in(ctx, "model.json").c_str()));
  std::cout << "trained " << pn_model_parameter_count(model.get()) << " parameters\n";
}

void run_cross_validate(Command& c, Context& ctx) {
  auto ds = load_labeled(c, ctx);
  double mean = 0.0;
  check(pn_cross_validate(ds.get(), ctx.config.dump().c_str(), path_in(ctx, "report.json").c_str(),
                          path_in(ctx, "curves").c_str(), &mean));
  std::cout << "mean accuracy " << mean << '\n';
}

void run_predict(Command& c, Context& ctx) {
  const auto model_path = input(c, ctx, "model", true);
  const auto signals = input(c, ctx, "signals", true);
  const auto labels = input(c, ctx, "labels", false);
  pn_model* m = nullptr;
  check(pn_model_load(model_path.c_str(), &m));
  Model model(m);
  double acc = 0.0;
  check(pn_model_predict_files(model.get(), signals.c_str(), labels.empty() ? nullptr : labels.c_str(),
                               path_in(ctx, "predictions.csv").c_str(), &acc));
  if (std::isfinite(acc)) std::cout << "accuracy " << acc << '\n';
}

void run_synth(Context& ctx) {
  pn_dataset* raw = nullptr;
  pn_graph* truth = nullptr;
  check(pn_dataset_synthesize(ctx.config.dump().c_str(), &raw, &truth));
  Dataset ds(raw);
  Graph graph(truth);
  check(pn_dataset_save(ds.get(), path_in(ctx, "signals.csv").c_str(),
                        path_in(ctx, "labels.csv").c_str()));
  check(pn_graph_save_edges(graph.get(), path_in(ctx, "ground_truth.csv").c_str()));
  std::cout << pn_dataset_nodes(ds.get()) << " nodes x " << pn_dataset_subjects(ds.get())
            << " subjects\n";
}

void run_benchmark(Context& ctx) {
  check(pn_benchmark(ctx.config.dump().c_str(), path_in(ctx, "benchmark.csv").c_str()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph signal inference and Chebyshev graph convolution toolkit", "petnet"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pn_version());

  // Commands are stored in a list so option callbacks can keep stable pointers.
  std::vector<std::unique_ptr<Command>> commands;
  auto add = [&](const std::string& name, const std::string& desc) -> Command& {
    commands.push_back(std::make_unique<Command>());
    Command& c = *commands.back();
    init_command(c, app, name, desc);
    add_seed(c);
    add_set(c);
    return c;
  };

  auto& infer = add("infer-graph", "threshold the correlation matrix of a signals CSV");
  infer.input("--signals", "signals", "signals CSV (rows are nodes)");
  infer.key("--threshold", "threshold", Kind::Real, "correlation threshold");
  bool dense = false;
  infer.app->add_flag("--dense", dense, "also write the dense adjacency matrix");

  auto& coarsen = add("coarsen", "build a padded coarsening hierarchy");
  coarsen.input("--graph", "graph", "edge-list CSV");
  coarsen.input("--signals", "signals", "signals CSV to infer the graph from");
  coarsen.key("--threshold", "threshold", Kind::Real, "correlation threshold");
  coarsen.key("--levels", "levels", Kind::Int, "number of coarsening levels");
  std::size_t coarsen_nodes = 0;
  coarsen.app->add_option("--nodes", coarsen_nodes, "node count for the edge list (default: inferred)");

  auto& train = add("train", "train one model on a labeled dataset");
  train.input("--signals", "signals", "signals CSV");
  train.input("--labels", "labels", "labels CSV");
  train.input("--graph", "graph", "edge-list CSV (default: inferred from the signals)");
  train.key("--threshold", "threshold", Kind::Real, "correlation threshold");
  add_network_flags(train);

  auto& cv = add("cross-validate", "repeated stratified k-fold evaluation");
  cv.input("--signals", "signals", "signals CSV");
  cv.input("--labels", "labels", "labels CSV");
  cv.key("--threshold", "threshold", Kind::Real, "correlation threshold");
  cv.key("--folds", "folds", Kind::Int, "folds per repeat");
  cv.key("--repeats", "repeats", Kind::Int, "repeats");
  cv.key("--graph-mode", "graph", Kind::Str, "inferred, random or empty");
  cv.key("--jobs", "jobs", Kind::Int, "worker threads");
  cv.key("--track-validation", "track_validation", Kind::Bool, "record test accuracy per epoch");
  add_network_flags(cv);

  auto& predict = add("predict", "classify subjects with a saved model");
  predict.input("--model", "model", "model JSON");
  predict.input("--signals", "signals", "signals CSV");
  predict.input("--labels", "labels", "optional labels CSV for accuracy");

  auto& synth = add("synth", "generate a planted-community dataset");
  synth.key("--nodes", "n_nodes", Kind::Int, "node count");
  synth.key("--subjects-per-class", "subjects_per_class", Kind::Int, "subjects per class");
  synth.key("--classes", "n_classes", Kind::Int, "class count");
  synth.key("--blocks", "block_sizes", Kind::IntList, "community sizes, comma separated");
  synth.key("--strength", "strength", Kind::Real, "shared latent scale");
  synth.key("--noise", "noise", Kind::Real, "independent noise std");
  synth.key("--class-offset", "class_offset", Kind::Real, "class mean offset");

  auto& bench = add("benchmark", "time Chebyshev against exact spectral filtering");
  bench.key("--n", "bench_n", Kind::Int, "node count");
  bench.key("--k,--K", "K", Kind::Int, "polynomial order");
  bench.key("--densities", "bench_densities", Kind::RealList, "edge densities, comma separated");
  bench.key("--min-seconds", "bench_min_seconds", Kind::Real, "minimum time per trial");
  bench.key("--dense-limit", "dense_limit", Kind::Int, "largest n for the exact path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return kExitInvalid;
  }

  const std::vector<std::string> args(argv, argv + argc);
  for (auto& cmd : commands) {
    if (!cmd->app->parsed()) continue;
    try {
      auto ctx = prepare(*cmd);
      const auto& name = cmd->name;
      if (name == "infer-graph") run_infer_graph(*cmd, ctx, dense);
      else if (name == "coarsen") run_coarsen(*cmd, ctx, coarsen_nodes);
      else if (name == "train") run_train(*cmd, ctx);
      else if (name == "cross-validate") run_cross_validate(*cmd, ctx);
      else if (name == "predict") run_predict(*cmd, ctx);
      else if (name == "synth") run_synth(ctx);
      else run_benchmark(ctx);
      finish(*cmd, ctx, args);
      std::cout << "wrote " << ctx.out.string() << '\n';
      return kExitOk;
    } catch (const Failure& f) {
      std::cerr << "petnet " << cmd->name << ": " << f.message << '\n';
      return f.code;
    } catch (const std::exception& e) {
      std::cerr << "petnet " << cmd->name << ": " << e.what() << '\n';
      return kExitRuntime;
    }
  }
  return kExitInvalid;
}
