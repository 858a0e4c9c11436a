#include "swarmsynth.h"

#include <cstring>
#include <string>

#include "core.hpp"
#include "pipeline.hpp"

using swarmsynth::ConfigError;
using swarmsynth::Policy;
using swarmsynth::RunConfig;

struct ss_session {
    RunConfig config;
};

struct ss_policy {
    Policy policy;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

template <typename Fn>
ss_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return SS_OK;
    } catch (const ConfigError& e) {
        set_error(e.what());
        return SS_ERR_CONFIG;
    } catch (const std::exception& e) {
        std::string what = e.what();
        set_error(what);
        if (what.find("cannot open") != std::string::npos ||
            what.find("missing") != std::string::npos)
            return SS_ERR_IO;
        return SS_ERR_RUNTIME;
    }
}

ss_status run_stage_fn(ss_session* session, void (*stage)(const RunConfig&)) {
    if (!session || !stage) {
        set_error("null session");
        return SS_ERR_ARGUMENT;
    }
    return guarded([&] { stage(session->config); });
}

}  // namespace

extern "C" {

const char* ss_status_name(ss_status status) {
    switch (status) {
        case SS_OK: return "ok";
        case SS_ERR_ARGUMENT: return "argument error";
        case SS_ERR_CONFIG: return "config error";
        case SS_ERR_IO: return "io error";
        case SS_ERR_RUNTIME: return "runtime error";
    }
    return "unknown";
}

const char* ss_version(void) { return "0.1.0"; }

const char* ss_last_error(void) { return g_last_error.c_str(); }

ss_status ss_session_create(const char* config_json, ss_session** out_session) {
    if (!config_json || !out_session) {
        set_error("null argument");
        return SS_ERR_ARGUMENT;
    }
    *out_session = nullptr;
    return guarded([&] {
        auto* s = new ss_session{RunConfig::from_json(config_json)};
        s->config.validate();
        *out_session = s;
    });
}

void ss_session_destroy(ss_session* session) { delete session; }

ss_status ss_stage_gen_data(ss_session* s) { return run_stage_fn(s, swarmsynth::stage_gen_data); }
ss_status ss_stage_train_model1(ss_session* s) { return run_stage_fn(s, swarmsynth::stage_train_model1); }
ss_status ss_stage_extract_sdes(ss_session* s) { return run_stage_fn(s, swarmsynth::stage_extract_sdes); }
ss_status ss_stage_estimate_model2(ss_session* s) { return run_stage_fn(s, swarmsynth::stage_estimate_model2); }
ss_status ss_stage_optimize(ss_session* s) { return run_stage_fn(s, swarmsynth::stage_optimize); }
ss_status ss_stage_verify(ss_session* s) { return run_stage_fn(s, swarmsynth::stage_verify); }
ss_status ss_stage_evaluate(ss_session* s) { return run_stage_fn(s, swarmsynth::stage_evaluate); }
ss_status ss_stage_evolve_baseline(ss_session* s) { return run_stage_fn(s, swarmsynth::stage_evolve_baseline); }
ss_status ss_stage_evolve_hybrid(ss_session* s) { return run_stage_fn(s, swarmsynth::stage_evolve_hybrid); }
ss_status ss_stage_online(ss_session* s) { return run_stage_fn(s, swarmsynth::stage_online); }
ss_status ss_stage_standalone(ss_session* s) { return run_stage_fn(s, swarmsynth::stage_standalone); }
ss_status ss_stage_report(ss_session* s) { return run_stage_fn(s, swarmsynth::stage_report); }

ss_status ss_run_stage(ss_session* session, const char* stage_name) {
    if (!session || !stage_name) {
        set_error("null argument");
        return SS_ERR_ARGUMENT;
    }
    const std::string name = stage_name;
    if (name == "gen-data") return ss_stage_gen_data(session);
    if (name == "train-model1") return ss_stage_train_model1(session);
    if (name == "extract-sdes") return ss_stage_extract_sdes(session);
    if (name == "estimate-model2") return ss_stage_estimate_model2(session);
    if (name == "optimize") return ss_stage_optimize(session);
    if (name == "verify") return ss_stage_verify(session);
    if (name == "evaluate") return ss_stage_evaluate(session);
    if (name == "evolve-baseline") return ss_stage_evolve_baseline(session);
    if (name == "evolve-hybrid") return ss_stage_evolve_hybrid(session);
    if (name == "online") return ss_stage_online(session);
    if (name == "standalone") return ss_stage_standalone(session);
    if (name == "report") return ss_stage_report(session);
    set_error("unknown stage: " + name);
    return SS_ERR_ARGUMENT;
}

ss_status ss_policy_random(const char* task, unsigned long long seed, ss_policy** out_policy) {
    if (!task || !out_policy) {
        set_error("null argument");
        return SS_ERR_ARGUMENT;
    }
    *out_policy = nullptr;
    return guarded([&] {
        swarmsynth::TaskId id = swarmsynth::task_from_string(task);
        *out_policy = new ss_policy{swarmsynth::uniform_random_policy(
            swarmsynth::state_space_for(id), swarmsynth::action_space_for(id), seed)};
    });
}

ss_status ss_policy_from_json(const char* json, ss_policy** out_policy) {
    if (!json || !out_policy) {
        set_error("null argument");
        return SS_ERR_ARGUMENT;
    }
    *out_policy = nullptr;
    return guarded([&] { *out_policy = new ss_policy{Policy::from_json(json)}; });
}

ss_status ss_policy_to_json(const ss_policy* policy, char** out_json) {
    if (!policy || !out_json) {
        set_error("null argument");
        return SS_ERR_ARGUMENT;
    }
    *out_json = nullptr;
    return guarded([&] {
        std::string s = policy->policy.to_json();
        char* buf = new char[s.size() + 1];
        std::memcpy(buf, s.c_str(), s.size() + 1);
        *out_json = buf;
    });
}

int ss_policy_states(const ss_policy* policy) { return policy ? policy->policy.n_states() : -1; }

int ss_policy_actions(const ss_policy* policy) { return policy ? policy->policy.n_actions() : -1; }

double ss_policy_prob(const ss_policy* policy, int state, int action) {
    if (!policy) return -1.0;
    if (state < 0 || state >= policy->policy.n_states()) return -1.0;
    if (action < 0 || action >= policy->policy.n_actions()) return -1.0;
    return policy->policy.row(state)[static_cast<size_t>(action)];
}

void ss_policy_destroy(ss_policy* policy) { delete policy; }

void ss_string_free(char* s) { delete[] s; }

}  // extern "C"
