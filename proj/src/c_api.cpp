#include "petnet/petnet.h"

#include "petnet/benchmark.hpp"
#include "petnet/error.hpp"
#include "petnet/io.hpp"
#include "petnet/serialization.hpp"
#include "petnet/synthetic.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <new>
#include <string>

struct pn_dataset {
  petnet::Dataset ds;
  bool labeled = true;
};
struct pn_graph {
  petnet::SparseGraph g;
};
struct pn_hierarchy {
  petnet::CoarseningHierarchy h;
};
struct pn_model {
  petnet::ModelFile file;
};

namespace {

thread_local std::string g_last_error;

pn_status status_of(petnet::ErrorKind kind) {
  using petnet::ErrorKind;
  switch (kind) {
    case ErrorKind::Validation: return PN_ERR_VALIDATION;
    case ErrorKind::Dimension: return PN_ERR_DIMENSION;
    case ErrorKind::Config: return PN_ERR_CONFIG;
    case ErrorKind::Domain: return PN_ERR_DOMAIN;
    case ErrorKind::Capability: return PN_ERR_CAPABILITY;
    case ErrorKind::Contract: return PN_ERR_CONTRACT;
    case ErrorKind::Io: return PN_ERR_IO;
    case ErrorKind::Runtime: return PN_ERR_RUNTIME;
  }
  return PN_ERR_RUNTIME;
}

template <class F>
pn_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return PN_OK;
  } catch (const petnet::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return PN_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PN_ERR_RUNTIME;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return PN_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PN_ERR_RUNTIME;
  }
}

char* dup_string(const std::string& s) {
  auto* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

petnet::json resolved(const char* config_json) {
  if (!config_json || !*config_json) return petnet::default_config();
  return petnet::resolve_config(petnet::json::parse(config_json));
}

pn_status null_argument(const char* what) {
  g_last_error = std::string(what) + " is null";
  return PN_ERR_ARGUMENT;
}

}  // namespace

#define PN_NEED(p)                        \
  do {                                    \
    if (!(p)) return null_argument(#p);   \
  } while (0)

extern "C" {

const char* pn_version(void) { return "0.1.0"; }

const char* pn_last_error(void) { return g_last_error.c_str(); }

const char* pn_status_name(pn_status status) {
  switch (status) {
    case PN_OK: return "ok";
    case PN_ERR_VALIDATION: return "validation";
    case PN_ERR_DIMENSION: return "dimension";
    case PN_ERR_CONFIG: return "config";
    case PN_ERR_DOMAIN: return "domain";
    case PN_ERR_CAPABILITY: return "capability";
    case PN_ERR_CONTRACT: return "contract";
    case PN_ERR_IO: return "io";
    case PN_ERR_RUNTIME: return "runtime";
    case PN_ERR_ARGUMENT: return "argument";
  }
  return "unknown";
}

void pn_string_free(char* s) { delete[] s; }

pn_status pn_config_defaults(char** out_json) {
  PN_NEED(out_json);
  return guarded([&] { *out_json = dup_string(petnet::default_config().dump()); });
}

pn_status pn_config_resolve(const char* overrides_json, char** out_json) {
  PN_NEED(out_json);
  return guarded([&] { *out_json = dup_string(resolved(overrides_json).dump()); });
}

pn_status pn_dataset_load(const char* signals_csv, const char* labels_csv, pn_dataset** out) {
  PN_NEED(signals_csv);
  PN_NEED(labels_csv);
  PN_NEED(out);
  return guarded([&] { *out = new pn_dataset{petnet::load_dataset(signals_csv, labels_csv), true}; });
}

pn_status pn_dataset_load_signals(const char* signals_csv, pn_dataset** out) {
  PN_NEED(signals_csv);
  PN_NEED(out);
  return guarded([&] {
    petnet::Dataset ds;
    ds.signals = petnet::load_signals(signals_csv);
    *out = new pn_dataset{std::move(ds), false};
  });
}

pn_status pn_dataset_synthesize(const char* config_json, pn_dataset** out, pn_graph** ground_truth) {
  PN_NEED(out);
  return guarded([&] {
    auto data = petnet::generate_synthetic(petnet::synthetic_spec(resolved(config_json)));
    if (ground_truth) *ground_truth = new pn_graph{std::move(data.ground_truth)};
    *out = new pn_dataset{std::move(data.dataset), true};
  });
}

pn_status pn_dataset_save(const pn_dataset* ds, const char* signals_csv, const char* labels_csv) {
  PN_NEED(ds);
  PN_NEED(signals_csv);
  return guarded([&] {
    if (labels_csv && ds->labeled)
      petnet::write_dataset(ds->ds, signals_csv, labels_csv);
    else
      petnet::write_signals(ds->ds.signals, signals_csv);
  });
}

size_t pn_dataset_nodes(const pn_dataset* ds) { return ds ? ds->ds.n_nodes() : 0; }
size_t pn_dataset_subjects(const pn_dataset* ds) { return ds ? ds->ds.n_subjects() : 0; }
size_t pn_dataset_classes(const pn_dataset* ds) {
  return ds ? static_cast<size_t>(ds->ds.n_classes()) : 0;
}
void pn_dataset_free(pn_dataset* ds) { delete ds; }

pn_status pn_graph_infer(const pn_dataset* ds, double threshold, pn_graph** out) {
  PN_NEED(ds);
  PN_NEED(out);
  return guarded([&] {
    *out = new pn_graph{
        petnet::infer_graph(petnet::pearson_correlation(ds->ds.signals), threshold)};
  });
}

pn_status pn_graph_baseline(const char* kind, size_t n_nodes, size_t n_edges, uint64_t seed,
                            pn_graph** out) {
  PN_NEED(kind);
  PN_NEED(out);
  return guarded([&] {
    const auto mode = petnet::parse_graph_mode(kind);
    petnet::require(mode != petnet::GraphMode::Inferred, petnet::ErrorKind::Config,
                    "baseline graph kind must be empty or random");
    *out = new pn_graph{petnet::baseline_graph(mode, n_nodes, n_edges, seed)};
  });
}

pn_status pn_graph_load(const char* edge_csv, size_t n_nodes, pn_graph** out) {
  PN_NEED(edge_csv);
  PN_NEED(out);
  return guarded([&] {
    std::optional<std::size_t> n;
    if (n_nodes > 0) n = n_nodes;
    *out = new pn_graph{petnet::read_edge_list(edge_csv, n)};
  });
}

pn_status pn_graph_save_edges(const pn_graph* g, const char* path) {
  PN_NEED(g);
  PN_NEED(path);
  return guarded([&] { petnet::write_edge_list(g->g, path); });
}

pn_status pn_graph_save_dense(const pn_graph* g, const char* path) {
  PN_NEED(g);
  PN_NEED(path);
  return guarded([&] { petnet::write_dense_adjacency(g->g, path); });
}

size_t pn_graph_nodes(const pn_graph* g) { return g ? g->g.size() : 0; }
size_t pn_graph_edges(const pn_graph* g) { return g ? g->g.edge_count() : 0; }
void pn_graph_free(pn_graph* g) { delete g; }

pn_status pn_hierarchy_build(const pn_graph* g, int levels, uint64_t seed, pn_hierarchy** out) {
  PN_NEED(g);
  PN_NEED(out);
  return guarded([&] { *out = new pn_hierarchy{petnet::build_hierarchy(g->g, levels, seed)}; });
}

pn_status pn_hierarchy_save_json(const pn_hierarchy* h, const char* path) {
  PN_NEED(h);
  PN_NEED(path);
  return guarded([&] { petnet::write_json_file(petnet::to_json(h->h), path); });
}

size_t pn_hierarchy_levels(const pn_hierarchy* h) { return h ? h->h.levels.size() : 0; }
size_t pn_hierarchy_level_size(const pn_hierarchy* h, size_t level) {
  return h && level < h->h.levels.size() ? h->h.levels[level].size() : 0;
}
void pn_hierarchy_free(pn_hierarchy* h) { delete h; }

pn_status pn_model_train(const pn_dataset* ds, const pn_graph* g, const char* config_json,
                         pn_model** out, const char* curve_csv) {
  PN_NEED(ds);
  PN_NEED(g);
  PN_NEED(out);
  return guarded([&] {
    petnet::require(ds->labeled, petnet::ErrorKind::Validation, "training needs labels");
    const auto cfg = resolved(config_json);
    auto ncfg = petnet::network_config(cfg);
    ncfg.n_classes = ds->ds.n_classes();
    auto result = petnet::train(ds->ds, g->g, ncfg, petnet::train_config(cfg));
    if (curve_csv) petnet::write_curve_csv(result.curve, curve_csv);
    *out = new pn_model{{std::move(result.model), ds->ds.class_names}};
  });
}

pn_status pn_model_save(const pn_model* m, const char* path) {
  PN_NEED(m);
  PN_NEED(path);
  return guarded([&] { petnet::save_model(m->file, path); });
}

pn_status pn_model_load(const char* path, pn_model** out) {
  PN_NEED(path);
  PN_NEED(out);
  return guarded([&] { *out = new pn_model{petnet::load_model(path)}; });
}

size_t pn_model_parameter_count(const pn_model* m) { return m ? m->file.model.parameter_count() : 0; }

pn_status pn_model_predict(const pn_model* m, const pn_dataset* ds, int* out_labels) {
  PN_NEED(m);
  PN_NEED(ds);
  PN_NEED(out_labels);
  return guarded([&] {
    petnet::require(ds->ds.n_nodes() == m->file.model.input_nodes(), petnet::ErrorKind::Dimension,
                    "dataset has " + std::to_string(ds->ds.n_nodes()) + " nodes but the model expects " +
                        std::to_string(m->file.model.input_nodes()));
    const auto pred = petnet::predict(m->file.model, ds->ds.samples());
    std::copy(pred.begin(), pred.end(), out_labels);
  });
}

pn_status pn_model_predict_files(const pn_model* m, const char* signals_csv, const char* labels_csv,
                                 const char* out_csv, double* accuracy) {
  PN_NEED(m);
  PN_NEED(signals_csv);
  PN_NEED(out_csv);
  return guarded([&] {
    const auto& names = m->file.class_names;
    petnet::Dataset ds;
    const bool labeled = labels_csv != nullptr;
    if (labeled)
      ds = petnet::load_dataset(signals_csv, labels_csv, names);
    else
      ds.signals = petnet::load_signals(signals_csv);
    petnet::require(ds.n_nodes() == m->file.model.input_nodes(), petnet::ErrorKind::Dimension,
                    "signals have " + std::to_string(ds.n_nodes()) + " nodes but the model expects " +
                        std::to_string(m->file.model.input_nodes()));
    const auto pred = petnet::predict(m->file.model, ds.samples());

    const std::filesystem::path path(out_csv);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    petnet::require(static_cast<bool>(out), petnet::ErrorKind::Io, "cannot write " + path.string());
    out << (labeled ? "subject_id,predicted,label\n" : "subject_id,predicted\n");
    for (std::size_t s = 0; s < pred.size(); ++s) {
      out << ds.signals.subject_ids[s] << ',' << names.at(static_cast<std::size_t>(pred[s]));
      if (labeled) out << ',' << names.at(static_cast<std::size_t>(ds.labels[s]));
      out << '\n';
    }
    petnet::require(static_cast<bool>(out), petnet::ErrorKind::Io, "failed writing " + path.string());
    if (accuracy)
      *accuracy = labeled ? petnet::accuracy(pred, ds.labels)
                          : std::numeric_limits<double>::quiet_NaN();
  });
}

void pn_model_free(pn_model* m) { delete m; }

pn_status pn_cross_validate(const pn_dataset* ds, const char* config_json, const char* report_json,
                            const char* curves_dir, double* mean_accuracy) {
  PN_NEED(ds);
  PN_NEED(report_json);
  return guarded([&] {
    petnet::require(ds->labeled, petnet::ErrorKind::Validation, "cross-validation needs labels");
    const auto cfg = resolved(config_json);
    const auto report = petnet::cross_validate(ds->ds, petnet::network_config(cfg),
                                               petnet::train_config(cfg), petnet::cv_config(cfg));
    petnet::write_json_file(petnet::to_json(report, ds->ds.signals.subject_ids), report_json);
    if (curves_dir) {
      const std::filesystem::path dir(curves_dir);
      for (const auto& r : report.runs)
        petnet::write_curve_csv(r.curve, dir / ("curve_r" + std::to_string(r.repeat) + "_f" +
                                                std::to_string(r.fold) + ".csv"));
    }
    if (mean_accuracy) *mean_accuracy = report.mean;
  });
}

pn_status pn_benchmark(const char* config_json, const char* csv_path) {
  PN_NEED(csv_path);
  return guarded([&] {
    petnet::write_benchmark_csv(petnet::run_benchmark(petnet::benchmark_config(resolved(config_json))),
                                csv_path);
  });
}

pn_status pn_file_digest(const char* path, char* out_hex) {
  PN_NEED(path);
  PN_NEED(out_hex);
  return guarded([&] {
    const auto hex = petnet::file_digest(path);
    std::memcpy(out_hex, hex.c_str(), hex.size() + 1);
  });
}

}  // extern "C"
