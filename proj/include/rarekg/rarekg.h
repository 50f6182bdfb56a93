#ifndef RAREKG_RAREKG_H
#define RAREKG_RAREKG_H

/*
 * C interface to the rarekg library.
 *
 * Every function returns a rarekg_status. On failure the symbolic error code
 * and message of the calling thread's last error are available through
 * rarekg_last_error_code() and rarekg_last_error_message(). Strings returned
 * through char** out-parameters are owned by the caller and released with
 * rarekg_string_free().
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define RAREKG_API __declspec(dllexport)
#else
#define RAREKG_API __attribute__((visibility("default")))
#endif

typedef enum rarekg_status {
  RAREKG_OK = 0,
  RAREKG_ERR_PARSE = 1,
  RAREKG_ERR_VALIDATION = 2,
  RAREKG_ERR_IO = 3,
  RAREKG_ERR_INVALID_ARGUMENT = 4,
  RAREKG_ERR_NOT_FOUND = 5,
  RAREKG_ERR_DEGENERATE = 6,
  RAREKG_ERR_UNEVALUABLE = 7,
  RAREKG_ERR_REMOTE = 8,
  RAREKG_ERR_INTERNAL = 9
} rarekg_status;

typedef struct rarekg_config rarekg_config;
typedef struct rarekg_engine rarekg_engine;

typedef struct rarekg_bootstrap_result {
  double mean;
  double lower;
  double upper;
  double std_error;
  double half_width;
} rarekg_bootstrap_result;

RAREKG_API const char* rarekg_version(void);
RAREKG_API const char* rarekg_last_error_code(void);
RAREKG_API const char* rarekg_last_error_message(void);
RAREKG_API void rarekg_string_free(char* s);

/* Configuration */

RAREKG_API rarekg_status rarekg_config_load(const char* path, rarekg_config** out);
RAREKG_API rarekg_status rarekg_config_parse(const char* json_text, const char* base_dir, rarekg_config** out);
RAREKG_API void rarekg_config_free(rarekg_config* cfg);
RAREKG_API rarekg_status rarekg_config_set_seed(rarekg_config* cfg, uint64_t seed);
RAREKG_API rarekg_status rarekg_config_set_output_dir(rarekg_config* cfg, const char* dir);
RAREKG_API rarekg_status rarekg_config_set_replay(rarekg_config* cfg, const char* path);
/* Reads RAREKG_RESOLVER_URL, RAREKG_LLM_URL and RAREKG_LLM_KEY. */
RAREKG_API rarekg_status rarekg_config_apply_environment(rarekg_config* cfg);
RAREKG_API rarekg_status rarekg_config_hash(const rarekg_config* cfg, char** out);
RAREKG_API rarekg_status rarekg_config_to_json(const rarekg_config* cfg, char** out);
/* Resolved path of a config entry: an input name ("ontology", "hpoa", ...,
 * "snapshot") or "output_dir". Empty string when unset. */
RAREKG_API rarekg_status rarekg_config_path(const rarekg_config* cfg, const char* name, char** out);

/* Engine: a built or loaded knowledge base plus the run configuration. */

/* Parses and validates the configured sources. The validation report (JSON)
 * is returned whether or not validation passes; on error findings the status
 * is RAREKG_ERR_VALIDATION and *out is NULL. */
RAREKG_API rarekg_status rarekg_engine_build(const rarekg_config* cfg, rarekg_engine** out, char** validation_json);
RAREKG_API rarekg_status rarekg_engine_load_snapshot(const rarekg_config* cfg, const char* path, rarekg_engine** out);
RAREKG_API void rarekg_engine_free(rarekg_engine* engine);
RAREKG_API rarekg_status rarekg_engine_snapshot(const rarekg_engine* engine, char** out);
RAREKG_API rarekg_status rarekg_engine_stats(const rarekg_engine* engine, char** out_json);

/* query_json: {"type":"phenotypes","phenotypes":[...],"k":N} or
 * {"type":"disease"|"gene"|"variant","key":"...","include":[edge kinds]}.
 * structured != 0 selects the JSON context form. */
RAREKG_API rarekg_status rarekg_engine_retrieve(const rarekg_engine* engine, const char* query_json, int structured,
                                                char** out);
/* method: "BASE_IC" or "BIDIRECTIONAL", NULL for the configured one; k <= 0
 * uses the configured k. Output: line-delimited rankings. */
RAREKG_API rarekg_status rarekg_engine_rank(const rarekg_engine* engine, const char* cases_jsonl, const char* method,
                                            int k, char** out_jsonl);
/* spec_json overrides the configured synthetic defaults; NULL or "{}" uses
 * them. Output: line-delimited case documents. */
RAREKG_API rarekg_status rarekg_engine_simulate(const rarekg_engine* engine, const char* spec_json, char** out_jsonl);
RAREKG_API rarekg_status rarekg_engine_difficulty(const rarekg_engine* engine, const char* cases_jsonl,
                                                  char** out_json);
RAREKG_API rarekg_status rarekg_engine_map_feature(const rarekg_engine* engine, const char* text, char** out_id);
/* Line-delimited {case_id, features:[text | {text, category}]}. */
RAREKG_API rarekg_status rarekg_engine_evidence(const rarekg_engine* engine, const char* features_jsonl,
                                                char** out_json);
/* Scores predictions against case truths. *n_unevaluable receives the count
 * of cases excluded from the denominators. */
RAREKG_API rarekg_status rarekg_engine_evaluate(rarekg_engine* engine, const char* cases_jsonl,
                                                const char* predictions_jsonl, char** out_json, char** out_csv,
                                                size_t* n_unevaluable);
/* Fits the linear surrogate of "top prediction == target" on case phenotypes. */
RAREKG_API rarekg_status rarekg_engine_surrogate(rarekg_engine* engine, const char* cases_jsonl,
                                                 const char* predictions_jsonl, const char* target, char** out_json);
/* Retrieves context for the case phenotypes and asks the LLM endpoint. */
RAREKG_API rarekg_status rarekg_engine_diagnose(rarekg_engine* engine, const char* case_json, char** out_text);

/* Stateless operations */

/* mode "incremental" with arg "1".."6", or "ablation" with a section name. */
RAREKG_API rarekg_status rarekg_slice(const char* cases_jsonl, const char* mode, const char* arg,
                                      const char* config_hash, char** out_jsonl);
RAREKG_API rarekg_status rarekg_finder(const char* scorecards_csv, const char* config_hash, char** out_json);
RAREKG_API rarekg_status rarekg_bootstrap(const double* values, size_t n, size_t resamples, double level,
                                          uint64_t seed, rarekg_bootstrap_result* out);
RAREKG_API rarekg_status rarekg_compare_groups(const double* a, size_t na, const double* b, size_t nb, double* t,
                                               double* p);
/* x is row-major rows x cols; coefficients are written in column order, with
 * 0 for dropped zero-variance columns. */
RAREKG_API rarekg_status rarekg_surrogate_fit(const double* x, size_t rows, size_t cols, const double* y,
                                              double ridge_lambda, double* coefficients, double* intercept);
/* Linear-interpolation quantile of an unsorted sample. */
RAREKG_API rarekg_status rarekg_quantile(const double* values, size_t n, double p, double* out);

#ifdef __cplusplus
}
#endif

#endif /* RAREKG_RAREKG_H */
