#pragma once

#include "pagerank.hpp"
#include "transition.hpp"

namespace swarmsynth {

enum class DeadlockClass { no_deadlock, stops_only_in_desired, potential_deadlock };

std::string deadlock_class_name(DeadlockClass c);

// Reachability check outcome; `missing` groups unreachable targets by source.
struct PathCheck {
    bool holds = true;
    std::vector<std::pair<int, std::vector<int>>> missing;
};

struct VerificationReport {
    std::vector<int> s_static;
    std::vector<int> s_des;
    DeadlockClass deadlock = DeadlockClass::no_deadlock;
    std::vector<int> deadlock_offenders;  // S_static \ S_des
    PathCheck prop1;    // paths from all s not in S_des to all s in S_des (graph of H)
    PathCheck prop2_1;  // direct env exits from static non-desired states
    PathCheck prop2_2;  // paths from all non-static states to every state (graph of H)
    std::vector<double> pagerank_active;  // PR over the patched H graph
    std::vector<double> pagerank_env;     // PR over the patched E graph
    std::vector<double> pagerank_active_delta;  // vs reference, when given
    std::vector<double> pagerank_env_delta;
    std::vector<int> unobserved_states;  // no outgoing events of any kind
    std::vector<std::string> notes;

    std::string to_json() const;
    std::string to_text() const;  // counterexample-table rendering
};

// States with an exactly-zero H row: no self-driven transitions.
std::vector<int> static_states(const Matrix& h);

DeadlockClass classify_deadlock(const std::vector<int>& s_static, const DesiredStateSet& s_des,
                                std::vector<int>* offenders = nullptr);

// Edges exist wherever the matrix entry is > 0; the propositions are about
// possibility, not likelihood. `near_zero_cutoff` only affects reporting.
PathCheck check_prop1(const Matrix& h, const DesiredStateSet& s_des);
std::pair<PathCheck, PathCheck> check_prop2(const Matrix& h, const Matrix& e,
                                            const std::vector<int>& s_static,
                                            const DesiredStateSet& s_des);

// PR of the action-driven and environment-driven graphs (dangling rows
// patched to uniform), plus per-state deltas when a reference is supplied.
struct PageRankInspection {
    std::vector<double> active;
    std::vector<double> env;
    std::vector<double> active_delta;
    std::vector<double> env_delta;
};
PageRankInspection pagerank_inspection(const TransitionModel& model, const Policy& policy,
                                       const TransitionModel* ref_model = nullptr,
                                       const Policy* ref_policy = nullptr);

VerificationReport verify_policy(const TransitionModel& model, const Policy& policy,
                                 const DesiredStateSet& s_des,
                                 const TransitionModel* ref_model = nullptr,
                                 const Policy* ref_policy = nullptr,
                                 double near_zero_cutoff = 1e-6);

// Row-normalize and patch all-zero rows to uniform (for PR over H or E).
Matrix patched_stochastic(const Matrix& m);

}  // namespace swarmsynth
