/* C interface to the latent tree toolkit.
 *
 * Every function returning ltm_status leaves a message for ltm_last_error()
 * on failure. Strings returned through char** are owned by the caller and
 * released with ltm_string_free. Handles are immutable once created and may
 * be shared across threads; error and warning state is per thread. */
#ifndef LTM_LTM_H
#define LTM_LTM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LTM_API __declspec(dllexport)
#else
#define LTM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ltm_status {
  LTM_OK = 0,
  LTM_ERR_USAGE = 1,
  LTM_ERR_DATA = 2,
  LTM_ERR_NUMERICAL = 3
} ltm_status;

typedef struct ltm_model ltm_model;
typedef struct ltm_dataset ltm_dataset;
typedef struct ltm_rule ltm_rule;

LTM_API const char* ltm_version(void);
LTM_API const char* ltm_last_error(void);
/* Warnings raised by the last call on this thread. */
LTM_API size_t ltm_warning_count(void);
LTM_API const char* ltm_warning(size_t index);
LTM_API void ltm_string_free(char* s);

/* Datasets */
LTM_API ltm_status ltm_dataset_read_csv(const char* path, int dedupe, ltm_dataset** out);
LTM_API ltm_status ltm_dataset_parse_csv(const char* text, int dedupe, ltm_dataset** out);
LTM_API ltm_status ltm_dataset_to_csv(const ltm_dataset* data, char** out);
LTM_API void ltm_dataset_free(ltm_dataset* data);
LTM_API size_t ltm_dataset_num_records(const ltm_dataset* data);
LTM_API size_t ltm_dataset_num_variables(const ltm_dataset* data);
LTM_API double ltm_dataset_total_weight(const ltm_dataset* data);

/* Models */
LTM_API ltm_status ltm_model_load(const char* path, ltm_model** out);
LTM_API ltm_status ltm_model_from_json(const char* text, ltm_model** out);
LTM_API ltm_status ltm_model_to_json(const ltm_model* model, char** out);
LTM_API ltm_status ltm_model_save(const ltm_model* model, const char* path);
LTM_API void ltm_model_free(ltm_model* model);
LTM_API size_t ltm_model_num_variables(const ltm_model* model);
LTM_API const char* ltm_model_variable_name(const ltm_model* model, size_t index);
LTM_API int ltm_model_variable_is_latent(const ltm_model* model, size_t index);
LTM_API int ltm_model_variable_cardinality(const ltm_model* model, size_t index);
LTM_API long ltm_model_dimension(const ltm_model* model);
/* Checks a model file. Returns LTM_OK when valid, LTM_ERR_DATA when the file
 * loads but breaks invariants; *report lists one violation per line. */
LTM_API ltm_status ltm_model_validate_file(const char* path, char** report);
LTM_API ltm_status ltm_model_reroot(const ltm_model* model, const char* root, ltm_model** out);
LTM_API ltm_status ltm_model_sample(const ltm_model* model, size_t n, uint64_t seed, int include_latent,
                                    ltm_dataset** out);
LTM_API ltm_status ltm_model_loglik(const ltm_model* model, const ltm_dataset* data, double* loglik, double* bic);

/* Learning */
typedef struct ltm_em_options {
  int max_iterations;
  double tolerance;
  int restarts;
  uint64_t seed;
  double smoothing;
  int threads;
} ltm_em_options;

typedef struct ltm_search_options {
  ltm_em_options em;
  int screening_iterations;
  int max_latent_cardinality;
  int max_latent_count; /* 0: number of observed variables */
  int initial_max_cardinality;
} ltm_search_options;

LTM_API void ltm_em_options_default(ltm_em_options* options);
LTM_API void ltm_search_options_default(ltm_search_options* options);

/* variables may be NULL for every column. *table is a TSV of loglik and BIC
 * per cardinality. */
LTM_API ltm_status ltm_learn_lca(const ltm_dataset* data, const char* const* variables, size_t num_variables,
                                 const int* cardinalities, size_t num_cardinalities, const ltm_em_options* options,
                                 ltm_model** out, char** table);
LTM_API ltm_status ltm_learn_ltm(const ltm_dataset* data, const ltm_search_options* options, ltm_model** out,
                                 char** search_log);

/* Reports. log_base <= 0 means nats. format: 0 TSV, 1 aligned text. */
LTM_API ltm_status ltm_report_partition(const ltm_model* model, const char* latent, double log_base, int format,
                                        char** out);
LTM_API ltm_status ltm_report_edges(const ltm_model* model, double log_base, char** out);

/* Joint clustering from a group spec (JSON text). *table is the BIC table. */
LTM_API ltm_status ltm_joint_cluster(const ltm_dataset* data, const char* spec_json, const ltm_em_options* options,
                                     ltm_model** out, char** table);
/* Occurrence, merged class, MI and CIC table. target may be NULL / empty. */
LTM_API ltm_status ltm_joint_report(const ltm_model* model, const char* latent, const int* target,
                                    size_t num_target, const char* target_label, double smoothing, uint64_t seed,
                                    char** out);

/* Rules */
LTM_API ltm_status ltm_rule_derive(const ltm_model* model, const char* latent, const int* target, size_t num_target,
                                   const char* target_label, double smoothing, ltm_rule** out);
LTM_API ltm_status ltm_rule_load(const char* path, ltm_rule** out);
LTM_API ltm_status ltm_rule_parse(const char* text, ltm_rule** out);
LTM_API ltm_status ltm_rule_to_tsv(const ltm_rule* rule, char** out);
LTM_API void ltm_rule_free(ltm_rule* rule);
LTM_API ltm_status ltm_rule_sweep(const ltm_rule* rule, const ltm_model* model, const ltm_dataset* data,
                                  int threads, char** out);
/* data may be NULL; otherwise *agreement receives the share of records on
 * which the integer rule decides like the original. */
LTM_API ltm_status ltm_rule_integerize(const ltm_rule* rule, double scale, const ltm_dataset* data, ltm_rule** out,
                                       double* agreement);

/* Decision CSVs. With a model, the rule CSV gains a model_decision column and
 * *agreement (may be NULL) receives the weighted agreement. */
LTM_API ltm_status ltm_classify_rule(const ltm_rule* rule, const ltm_dataset* data, const ltm_model* model,
                                     int threads, char** out, double* agreement);
LTM_API ltm_status ltm_classify_model(const ltm_model* model, const char* latent, const int* target,
                                      size_t num_target, const ltm_dataset* data, int threads, char** out);

#ifdef __cplusplus
}
#endif

#endif
