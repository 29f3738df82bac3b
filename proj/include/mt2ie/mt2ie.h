#ifndef MT2IE_MT2IE_H
#define MT2IE_MT2IE_H

#include <stddef.h>

#if defined(_WIN32)
#define MT2IE_API __declspec(dllexport)
#else
#define MT2IE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mt2ie_status {
  MT2IE_OK = 0,
  MT2IE_E_PRECONDITION = 1,
  MT2IE_E_CONFIG = 2,
  MT2IE_E_TRANSPORT = 3,
  MT2IE_E_TIMEOUT = 4,
  MT2IE_E_MALFORMED_REPLY = 5,
  MT2IE_E_LOGPROBS_UNSUPPORTED = 6,
  MT2IE_E_SCORING_UNSUPPORTED = 7,
  MT2IE_E_SAFETY_REFUSAL = 8,
  MT2IE_E_PARSE = 9,
  MT2IE_E_SCHEMA = 10,
  MT2IE_E_IO = 11,
  MT2IE_E_UNDEFINED = 12,
  MT2IE_E_INTERNAL = 13
} mt2ie_status;

typedef struct mt2ie_config mt2ie_config;
typedef struct mt2ie_ledger mt2ie_ledger;

MT2IE_API const char* mt2ie_version(void);
MT2IE_API const char* mt2ie_status_name(mt2ie_status status);
/* Message of the last failure on the calling thread; empty after success. */
MT2IE_API const char* mt2ie_last_error(void);
/* Frees strings returned through char** out-parameters. */
MT2IE_API void mt2ie_string_free(char* s);

/* ---- configuration ---- */

MT2IE_API mt2ie_status mt2ie_config_load(const char* path, mt2ie_config** out);
MT2IE_API mt2ie_status mt2ie_config_parse(const char* json, mt2ie_config** out);
MT2IE_API void mt2ie_config_free(mt2ie_config* config);
MT2IE_API mt2ie_status mt2ie_config_set_mode(mt2ie_config* config, const char* mode);
MT2IE_API mt2ie_status mt2ie_config_set_iterations(mt2ie_config* config, int iterations);
MT2IE_API mt2ie_status mt2ie_config_set_repeats(mt2ie_config* config, int repeats);
MT2IE_API mt2ie_status mt2ie_config_set_template_set(mt2ie_config* config, const char* set);
/* Routes every endpoint to a builtin mock name or a mock script path. */
MT2IE_API mt2ie_status mt2ie_config_set_mock(mt2ie_config* config, const char* script);
MT2IE_API mt2ie_status mt2ie_config_repeats(const mt2ie_config* config, int* out);
/* Canonical JSON of the configuration (auth tokens omitted). */
MT2IE_API mt2ie_status mt2ie_config_to_json(const mt2ie_config* config, char** out);

/* ---- runs ---- */

typedef struct mt2ie_chain_summary {
  int repeat;         /* 0-based */
  int chain;          /* 1-based */
  const char* category;
  int records;
  int truncated;      /* nonzero when an error ended the chain early */
  int has_final_score;
  double final_score;
  const char* error;  /* NULL unless truncated */
  const char* ledger_path;
} mt2ie_chain_summary;

typedef void (*mt2ie_chain_callback)(const mt2ie_chain_summary* summary, void* user);

/* Runs every repeat and writes one ledger per repeat. With more than one
 * repeat, "-r<k>" is inserted before the extension of out_path. The callback
 * may be NULL. failed_chains may be NULL. */
MT2IE_API mt2ie_status mt2ie_run(const mt2ie_config* config, const char* out_path, mt2ie_chain_callback callback,
                                 void* user, int* failed_chains);

/* ---- scoring ---- */

/* method: "vqascore", "vqa-accuracy" or "aesthetic". Uses the configured
 * MLLM endpoint and template set. */
MT2IE_API mt2ie_status mt2ie_score_image(const mt2ie_config* config, const char* png_path, const char* prompt,
                                         const char* method, double* out);

/* ---- ledgers ---- */

MT2IE_API mt2ie_status mt2ie_ledger_read(const char* path, mt2ie_ledger** out);
MT2IE_API void mt2ie_ledger_free(mt2ie_ledger* ledger);
MT2IE_API size_t mt2ie_ledger_chain_count(const mt2ie_ledger* ledger);
MT2IE_API size_t mt2ie_ledger_record_count(const mt2ie_ledger* ledger);
MT2IE_API int mt2ie_ledger_failed_chains(const mt2ie_ledger* ledger);
MT2IE_API mt2ie_status mt2ie_ledger_write(const mt2ie_ledger* ledger, const char* path);

/* ---- analysis ---- */

/* Writes score/difficulty tables, SVG charts and the metric correlation
 * table into out_dir. */
MT2IE_API mt2ie_status mt2ie_analyze(const char* const* ledger_paths, size_t count, const char* out_dir);

/* Aggregates ledgers per T2I model and writes summary.tsv, ranking.tsv and,
 * with a reference rank file (may be NULL), rank_correlation.tsv. The
 * human-readable summary is returned through report_text (may be NULL). */
MT2IE_API mt2ie_status mt2ie_rank(const char* const* ledger_paths, size_t count, const char* out_dir,
                                  const char* reference_path, char** report_text);

MT2IE_API mt2ie_status mt2ie_compare_rank_files(const char* path_a, const char* path_b, double* tau, double* rho);

/* ---- metrics ---- */

MT2IE_API mt2ie_status mt2ie_kendall_tau(const double* x, const double* y, size_t n, double* out);
MT2IE_API mt2ie_status mt2ie_spearman_rho(const double* x, const double* y, size_t n, double* out);
MT2IE_API mt2ie_status mt2ie_flesch_kincaid(const char* text, double* out);
MT2IE_API mt2ie_status mt2ie_yngve_bracketed(const char* tree, double* out);
MT2IE_API mt2ie_status mt2ie_sentence_bleu(const char* candidate, const char* reference, int max_n, double* out);

#ifdef __cplusplus
}
#endif

#endif /* MT2IE_MT2IE_H */
