/* Public C interface of the ciedsim shared library.
 *
 * Every function returns a ciedsim_status. On failure the message of the
 * most recent error on the calling thread is available through
 * ciedsim_last_error(). Strings handed out through `char**` parameters are
 * owned by the caller and released with ciedsim_string_free().
 */
#ifndef CIEDSIM_H
#define CIEDSIM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CIEDSIM_API __declspec(dllexport)
#else
#define CIEDSIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ciedsim_status {
  CIEDSIM_OK = 0,
  CIEDSIM_E_CONFIG = 1,
  CIEDSIM_E_PARSE = 2,
  CIEDSIM_E_VERSION_MISMATCH = 3,
  CIEDSIM_E_INFEASIBLE_PLACEMENT = 4,
  CIEDSIM_E_OUT_OF_BOUNDS = 5,
  CIEDSIM_E_UNREACHABLE = 6,
  CIEDSIM_E_DEGENERATE_MODEL = 7,
  CIEDSIM_E_UNKNOWN_FEATURE_SHAPE = 8,
  CIEDSIM_E_SENSOR_UNAVAILABLE = 9,
  CIEDSIM_E_UNKNOWN_ROBOT = 10,
  CIEDSIM_E_INVALID_TRANSITION = 11,
  CIEDSIM_E_INVALID_COMMAND = 12,
  CIEDSIM_E_INVALID_SCHEDULE = 13,
  CIEDSIM_E_INCOMPATIBLE_LOG = 14,
  CIEDSIM_E_INCOMPATIBLE_REPORTS = 15,
  CIEDSIM_E_IO = 16,
  CIEDSIM_E_ARGUMENT = 100,
  CIEDSIM_E_INTERNAL = 101
} ciedsim_status;

typedef enum ciedsim_mode { CIEDSIM_CENTRALIZED = 0, CIEDSIM_MNS = 1 } ciedsim_mode;

typedef enum ciedsim_outcome {
  CIEDSIM_RUNNING = 0,
  CIEDSIM_COMPLETE = 1,
  CIEDSIM_MAX_TICKS = 2,
  CIEDSIM_ABORTED = 3
} ciedsim_outcome;

typedef struct ciedsim_scenario ciedsim_scenario;
typedef struct ciedsim_engine ciedsim_engine;

typedef struct ciedsim_gen_params {
  int width;
  int height;
  int threats;
  double indoor_fraction;
  double obstacle_density;
  int mode; /* ciedsim_mode */
} ciedsim_gen_params;

typedef struct ciedsim_run_options {
  uint64_t max_ticks;
  int supervised;
  const char* faults_json; /* fault schedule text, or NULL */
} ciedsim_run_options;

typedef struct ciedsim_scenario_info {
  uint64_t seed;
  int width;
  int height;
  int mode;
  uint32_t threats;
  uint32_t robots;
  uint32_t reachable_cells;
} ciedsim_scenario_info;

CIEDSIM_API const char* ciedsim_version(void);
CIEDSIM_API const char* ciedsim_last_error(void);
CIEDSIM_API const char* ciedsim_status_name(ciedsim_status status);
CIEDSIM_API void ciedsim_string_free(char* s);

CIEDSIM_API void ciedsim_gen_params_default(ciedsim_gen_params* params);
CIEDSIM_API void ciedsim_run_options_default(ciedsim_run_options* options);

/* Scenarios */
CIEDSIM_API ciedsim_status ciedsim_scenario_generate(const ciedsim_gen_params* params, uint64_t seed,
                                                     ciedsim_scenario** out);
CIEDSIM_API ciedsim_status ciedsim_scenario_parse(const char* text, size_t len, ciedsim_scenario** out);
CIEDSIM_API ciedsim_status ciedsim_scenario_load(const char* path, ciedsim_scenario** out);
CIEDSIM_API ciedsim_status ciedsim_scenario_save(const ciedsim_scenario* s, const char* path);
CIEDSIM_API ciedsim_status ciedsim_scenario_to_json(const ciedsim_scenario* s, char** out);
CIEDSIM_API ciedsim_status ciedsim_scenario_info_get(const ciedsim_scenario* s, ciedsim_scenario_info* out);
/* Reseeds the run-time streams; the map and threats stay as they are. */
CIEDSIM_API ciedsim_status ciedsim_scenario_set_seed(ciedsim_scenario* s, uint64_t seed);
CIEDSIM_API ciedsim_status ciedsim_scenario_set_mode(ciedsim_scenario* s, int mode);
CIEDSIM_API void ciedsim_scenario_free(ciedsim_scenario* s);

/* Engines */
CIEDSIM_API ciedsim_status ciedsim_engine_create(const ciedsim_scenario* s, const ciedsim_run_options* options,
                                                 ciedsim_engine** out);
CIEDSIM_API void ciedsim_engine_free(ciedsim_engine* e);
CIEDSIM_API ciedsim_status ciedsim_engine_step(ciedsim_engine* e);
CIEDSIM_API ciedsim_status ciedsim_engine_run(ciedsim_engine* e, int* outcome);
CIEDSIM_API uint64_t ciedsim_engine_tick(const ciedsim_engine* e);
CIEDSIM_API int ciedsim_engine_outcome(const ciedsim_engine* e);
CIEDSIM_API int ciedsim_engine_paused(const ciedsim_engine* e);
/* Current authority phase: 0 Explore .. 3 Complete. */
CIEDSIM_API int ciedsim_engine_phase(const ciedsim_engine* e);
/* Operator command as a JSON object, e.g. {"type":"retask","robot":3,"task":...}.
 * Validated immediately, applied at the next tick boundary. */
CIEDSIM_API ciedsim_status ciedsim_engine_submit(ciedsim_engine* e, const char* command_json);
/* Tick, phase, proposal, robots and candidates as JSON. */
CIEDSIM_API ciedsim_status ciedsim_engine_state_json(const ciedsim_engine* e, char** out);
/* Authority log-odds per cell (row-major); `len` must equal width*height. */
CIEDSIM_API ciedsim_status ciedsim_engine_heatmap(const ciedsim_engine* e, double* log_odds, size_t len);
CIEDSIM_API ciedsim_status ciedsim_engine_heatmap_csv(const ciedsim_engine* e, char** out);
CIEDSIM_API size_t ciedsim_engine_log_size(const ciedsim_engine* e);
/* Log lines [from, size) joined with newlines. */
CIEDSIM_API ciedsim_status ciedsim_engine_log_lines(const ciedsim_engine* e, size_t from, char** out);
CIEDSIM_API uint64_t ciedsim_engine_log_hash(const ciedsim_engine* e);
CIEDSIM_API ciedsim_status ciedsim_engine_report_json(const ciedsim_engine* e, char** out);

/* Reports and logs */
CIEDSIM_API ciedsim_status ciedsim_replay(const char* log_text, size_t len, char** report_json);
CIEDSIM_API ciedsim_status ciedsim_report_summary(const char* report_json, char** out);
CIEDSIM_API ciedsim_status ciedsim_compare(const char* report_a, const char* report_b, char** table);

#ifdef __cplusplus
}
#endif

#endif /* CIEDSIM_H */
