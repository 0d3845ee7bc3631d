/* C interface to the petnet toolkit. Every fallible call returns a pn_status;
 * on failure pn_last_error() describes the problem for the calling thread. */
#ifndef PETNET_H
#define PETNET_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PN_API __declspec(dllexport)
#else
#define PN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pn_status {
  PN_OK = 0,
  PN_ERR_VALIDATION = 1,
  PN_ERR_DIMENSION = 2,
  PN_ERR_CONFIG = 3,
  PN_ERR_DOMAIN = 4,
  PN_ERR_CAPABILITY = 5,
  PN_ERR_CONTRACT = 6,
  PN_ERR_IO = 7,
  PN_ERR_RUNTIME = 8,
  PN_ERR_ARGUMENT = 9 /* null handle or pointer */
} pn_status;

typedef struct pn_dataset pn_dataset;
typedef struct pn_graph pn_graph;
typedef struct pn_hierarchy pn_hierarchy;
typedef struct pn_model pn_model;

PN_API const char* pn_version(void);
PN_API const char* pn_last_error(void);
PN_API const char* pn_status_name(pn_status status);
PN_API void pn_string_free(char* s);

/* Configuration documents are flat JSON objects. */
PN_API pn_status pn_config_defaults(char** out_json);
PN_API pn_status pn_config_resolve(const char* overrides_json, char** out_json);

/* Datasets. Unlabeled datasets (signals only) serve graph inference and prediction. */
PN_API pn_status pn_dataset_load(const char* signals_csv, const char* labels_csv, pn_dataset** out);
PN_API pn_status pn_dataset_load_signals(const char* signals_csv, pn_dataset** out);
PN_API pn_status pn_dataset_synthesize(const char* config_json, pn_dataset** out,
                                       pn_graph** ground_truth);
PN_API pn_status pn_dataset_save(const pn_dataset* ds, const char* signals_csv,
                                 const char* labels_csv);
PN_API size_t pn_dataset_nodes(const pn_dataset* ds);
PN_API size_t pn_dataset_subjects(const pn_dataset* ds);
PN_API size_t pn_dataset_classes(const pn_dataset* ds);
PN_API void pn_dataset_free(pn_dataset* ds);

/* Graphs. kind is "empty" or "random". n_nodes = 0 infers the size from the file. */
PN_API pn_status pn_graph_infer(const pn_dataset* ds, double threshold, pn_graph** out);
PN_API pn_status pn_graph_baseline(const char* kind, size_t n_nodes, size_t n_edges, uint64_t seed,
                                   pn_graph** out);
PN_API pn_status pn_graph_load(const char* edge_csv, size_t n_nodes, pn_graph** out);
PN_API pn_status pn_graph_save_edges(const pn_graph* g, const char* path);
PN_API pn_status pn_graph_save_dense(const pn_graph* g, const char* path);
PN_API size_t pn_graph_nodes(const pn_graph* g);
PN_API size_t pn_graph_edges(const pn_graph* g);
PN_API void pn_graph_free(pn_graph* g);

PN_API pn_status pn_hierarchy_build(const pn_graph* g, int levels, uint64_t seed,
                                    pn_hierarchy** out);
PN_API pn_status pn_hierarchy_save_json(const pn_hierarchy* h, const char* path);
PN_API size_t pn_hierarchy_levels(const pn_hierarchy* h);
PN_API size_t pn_hierarchy_level_size(const pn_hierarchy* h, size_t level);
PN_API void pn_hierarchy_free(pn_hierarchy* h);

/* Training uses the network and training keys of a config document.
 * curve_csv may be NULL. */
PN_API pn_status pn_model_train(const pn_dataset* ds, const pn_graph* g, const char* config_json,
                                pn_model** out, const char* curve_csv);
PN_API pn_status pn_model_save(const pn_model* m, const char* path);
PN_API pn_status pn_model_load(const char* path, pn_model** out);
PN_API size_t pn_model_parameter_count(const pn_model* m);
/* Class index per subject; out_labels holds pn_dataset_subjects(ds) entries. */
PN_API pn_status pn_model_predict(const pn_model* m, const pn_dataset* ds, int* out_labels);
/* Loads signals (and labels if non-NULL, using the model's class names),
 * writes `subject_id,predicted[,label]` and stores accuracy or NaN. */
PN_API pn_status pn_model_predict_files(const pn_model* m, const char* signals_csv,
                                        const char* labels_csv, const char* out_csv,
                                        double* accuracy);
PN_API void pn_model_free(pn_model* m);

/* Writes the report JSON and, if curves_dir is non-NULL, one curve CSV per run. */
PN_API pn_status pn_cross_validate(const pn_dataset* ds, const char* config_json,
                                   const char* report_json, const char* curves_dir,
                                   double* mean_accuracy);

PN_API pn_status pn_benchmark(const char* config_json, const char* csv_path);

/* Lowercase hex SHA-256; out_hex needs 65 bytes. */
PN_API pn_status pn_file_digest(const char* path, char* out_hex);

#ifdef __cplusplus
}
#endif

#endif
