#ifndef TIDANSE_TIDANSE_H
#define TIDANSE_TIDANSE_H

/* C interface to the tidanse simulator. Every call returns a status; on
 * failure tdn_last_error() holds a message for the calling thread. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TDN_API __declspec(dllexport)
#else
#define TDN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tdn_status {
  TDN_OK = 0,
  TDN_ERR_DIMENSION_MISMATCH = 1,
  TDN_ERR_NOT_POSITIVE_DEFINITE = 2,
  TDN_ERR_NO_CONVERGENCE = 3,
  TDN_ERR_SINGULAR = 4,
  TDN_ERR_SINGULAR_T = 5,
  TDN_ERR_RANK_TOO_LARGE = 6,
  TDN_ERR_PLACEMENT_FAILED = 7,
  TDN_ERR_DEGENERATE_K = 8,
  TDN_ERR_UNREACHABLE = 9,
  TDN_ERR_CONFIG_INVALID = 10,
  TDN_ERR_SIGNAL_TOO_SHORT = 11,
  TDN_ERR_DANSE_REQUIRES_FC = 12,
  TDN_ERR_NON_POSITIVE_VALUE = 13,
  TDN_ERR_MALFORMED_CSV = 14,
  TDN_ERR_IO = 15,
  TDN_ERR_NULL_ARGUMENT = 16,
  TDN_ERR_INTERNAL = 17
} tdn_status;

typedef struct tdn_environment tdn_environment;
typedef struct tdn_simulation tdn_simulation;

typedef struct tdn_record {
  size_t iteration;
  size_t root;
  double connectivity_c; /* NaN when undefined (K <= 3) */
  double mse_w;
  size_t signals_exchanged;
} tdn_record;

TDN_API const char* tdn_version(void);
TDN_API const char* tdn_status_name(tdn_status status);
/* Message of the most recent failure on this thread; "" if none. */
TDN_API const char* tdn_last_error(void);

/* Experiment configs are flat JSON objects; absent keys take defaults. */
TDN_API tdn_status tdn_validate_config(const char* config_json);
/* Writes the outputs into the configured output_dir. wall_ms may be NULL. */
TDN_API tdn_status tdn_run_experiment(const char* config_json, double* wall_ms);
/* Both pruning strategies over the connectivity grid, into <out>/mst and <out>/mmut. */
TDN_API tdn_status tdn_run_sweep(const char* config_json);
/* Keys: k_values (array), n_wasns, seed, output_dir. */
TDN_API tdn_status tdn_prune_stats(const char* config_json);
/* kind: "mse_w", "snr" or "prune". */
TDN_API tdn_status tdn_emit_plot(const char* csv_path, const char* kind, const char* svg_path);

/* scenario_json may be NULL or "{}" for the default scene. */
TDN_API tdn_status tdn_environment_create(const char* scenario_json, uint64_t seed, tdn_environment** out);
TDN_API void tdn_environment_destroy(tdn_environment* env);
TDN_API size_t tdn_environment_nodes(const tdn_environment* env);
TDN_API size_t tdn_environment_bins(const tdn_environment* env);

/* algorithm: "danse", "ti-danse" or "ti-danse-plus"; pruning: "mst" or
 * "mmut". gevd_rank 0 selects the plain update. The simulation keeps its
 * environment alive. */
TDN_API tdn_status tdn_simulation_create(const tdn_environment* env, const char* algorithm, const char* pruning,
                                         size_t gevd_rank, uint64_t seed, tdn_simulation** out);
TDN_API void tdn_simulation_destroy(tdn_simulation* sim);
TDN_API tdn_status tdn_simulation_record(const tdn_simulation* sim, tdn_record* out);
TDN_API tdn_status tdn_simulation_step(tdn_simulation* sim, tdn_record* out);

#ifdef __cplusplus
}
#endif

#endif
