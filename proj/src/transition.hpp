#pragma once

#include "core.hpp"

namespace swarmsynth {

enum class TransitionCause { action, environment };

struct TransitionEvent {
    int robot = 0;
    int from_state = 0;
    int to_state = 0;
    TransitionCause cause = TransitionCause::environment;
    int action = -1;  // valid when cause == action
    double time_s = 0.0;
};

// Maximum-likelihood transition model: per-action count matrices, environment
// counts, and the derived row-stochastic matrices plus the mixing diagonal.
// Counts are the persisted truth; probabilities are always re-derived.
class TransitionModel {
public:
    TransitionModel(int n_states, int n_actions);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }

    void add_event(const TransitionEvent& e);
    void add_events(const std::vector<TransitionEvent>& events);
    void merge(const TransitionModel& other);

    int64_t action_count(int action, int from, int to) const;
    int64_t env_count(int from, int to) const;
    int64_t active_events_from(int state) const;
    int64_t env_events_from(int state) const;
    int64_t total_events() const;

    // A_k: rows normalized over observed counts; all-zero when unobserved.
    Matrix action_matrix(int action) const;
    Matrix env_matrix() const;
    // alpha(i) = active/(active+env); alpha_prior when state i was never seen.
    std::vector<double> alpha(double alpha_prior = 0.5) const;

    // True when not a single event has been recorded.
    bool empty() const { return total_ == 0; }

    std::string to_json() const;
    static TransitionModel from_json(const std::string& json);

private:
    int n_states_;
    int n_actions_;
    std::vector<std::vector<std::vector<int64_t>>> action_counts_;  // [M][N][N]
    std::vector<std::vector<int64_t>> env_counts_;                  // [N][N]
    int64_t total_ = 0;
};

TransitionModel estimate(const std::vector<TransitionEvent>& events, int n_states, int n_actions);

// H_pi(i,j) = sum_k A_k(i,j) pi(i,k). Rows with observed action mass are
// renormalized to 1 so unobserved actions do not leak probability; fully
// unobserved rows stay zero (these feed the static-state check).
Matrix compose_H(const TransitionModel& model, const Policy& policy);

// Row i of G = alpha_i H(i,.) + (1-alpha_i) E(i,.), renormalized; all-zero
// rows are patched to uniform so the power iteration stays well-posed.
Matrix compose_G(const TransitionModel& model, const Policy& policy, double alpha_prior = 0.5);
Matrix compose_G(const Matrix& h, const Matrix& e, const std::vector<double>& alpha);

// Per-prefix sup-norm distance of the derived probabilities (all A_k and E
// entries) to the final estimate, after re-estimating on each run prefix.
std::vector<double> convergence_trace(const std::vector<std::vector<TransitionEvent>>& event_batches,
                                      int n_states, int n_actions);

}  // namespace swarmsynth
