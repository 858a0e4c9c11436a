/*
 * swarmsynth C API.
 *
 * The core is a C++ library; this header is the stable surface exposed by the
 * shared library. Handles are opaque, every call returns a status code, and
 * the last failure message is kept per thread (ss_last_error).
 *
 * A session wraps one JSON run configuration (see README for the schema) and
 * drives the pipeline stages, each reading and writing files under the
 * configured output directory exactly like the CLI subcommand of the same
 * name.
 */
#ifndef SWARMSYNTH_H
#define SWARMSYNTH_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ss_status {
    SS_OK = 0,
    SS_ERR_ARGUMENT = 1, /* null or malformed argument */
    SS_ERR_CONFIG = 2,   /* configuration failed validation */
    SS_ERR_IO = 3,       /* missing or unreadable artifact */
    SS_ERR_RUNTIME = 4   /* stage execution failed */
} ss_status;

const char* ss_status_name(ss_status status);
const char* ss_version(void);

/* Message from the most recent failing call on this thread ("" if none). */
const char* ss_last_error(void);

/* ---- sessions ---------------------------------------------------------- */

typedef struct ss_session ss_session;

ss_status ss_session_create(const char* config_json, ss_session** out_session);
void ss_session_destroy(ss_session* session);

ss_status ss_stage_gen_data(ss_session* session);
ss_status ss_stage_train_model1(ss_session* session);
ss_status ss_stage_extract_sdes(ss_session* session);
ss_status ss_stage_estimate_model2(ss_session* session);
ss_status ss_stage_optimize(ss_session* session);
ss_status ss_stage_verify(ss_session* session);
ss_status ss_stage_evaluate(ss_session* session);
ss_status ss_stage_evolve_baseline(ss_session* session);
ss_status ss_stage_evolve_hybrid(ss_session* session);
ss_status ss_stage_online(ss_session* session);
ss_status ss_stage_standalone(ss_session* session);
ss_status ss_stage_report(ss_session* session);

/* Runs the stage with the given CLI-style name ("gen-data", "optimize", ...). */
ss_status ss_run_stage(ss_session* session, const char* stage_name);

/* ---- policies ---------------------------------------------------------- */

typedef struct ss_policy ss_policy;

/* task is "A", "B1", "B2" or "C". */
ss_status ss_policy_random(const char* task, unsigned long long seed, ss_policy** out_policy);
ss_status ss_policy_from_json(const char* json, ss_policy** out_policy);
/* The returned string must be released with ss_string_free. */
ss_status ss_policy_to_json(const ss_policy* policy, char** out_json);
int ss_policy_states(const ss_policy* policy);
int ss_policy_actions(const ss_policy* policy);
/* Probability of `action` in `state`; negative on bad indices. */
double ss_policy_prob(const ss_policy* policy, int state, int action);
void ss_policy_destroy(ss_policy* policy);

void ss_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* SWARMSYNTH_H */
