#include "transition.hpp"

#include <cmath>

#include "json.hpp"

namespace swarmsynth {

TransitionModel::TransitionModel(int n_states, int n_actions)
    : n_states_(n_states), n_actions_(n_actions) {
    if (n_states < 1 || n_actions < 1)
        throw ConfigError("transition model needs n_states >= 1 and n_actions >= 1");
    action_counts_.assign(static_cast<size_t>(n_actions),
                          std::vector<std::vector<int64_t>>(
                              static_cast<size_t>(n_states),
                              std::vector<int64_t>(static_cast<size_t>(n_states), 0)));
    env_counts_.assign(static_cast<size_t>(n_states),
                       std::vector<int64_t>(static_cast<size_t>(n_states), 0));
}

void TransitionModel::add_event(const TransitionEvent& e) {
    if (e.from_state < 0 || e.from_state >= n_states_ || e.to_state < 0 || e.to_state >= n_states_)
        throw std::out_of_range("transition event state index out of range");
    if (e.cause == TransitionCause::action) {
        if (e.action < 0 || e.action >= n_actions_)
            throw std::out_of_range("transition event action index out of range");
        action_counts_[static_cast<size_t>(e.action)][static_cast<size_t>(e.from_state)]
                      [static_cast<size_t>(e.to_state)]++;
    } else {
        env_counts_[static_cast<size_t>(e.from_state)][static_cast<size_t>(e.to_state)]++;
    }
    total_++;
}

void TransitionModel::add_events(const std::vector<TransitionEvent>& events) {
    for (const auto& e : events) add_event(e);
}

void TransitionModel::merge(const TransitionModel& other) {
    if (other.n_states_ != n_states_ || other.n_actions_ != n_actions_)
        throw ConfigError("cannot merge transition models of different shapes");
    for (int k = 0; k < n_actions_; ++k)
        for (int i = 0; i < n_states_; ++i)
            for (int j = 0; j < n_states_; ++j)
                action_counts_[k][i][j] += other.action_counts_[k][i][j];
    for (int i = 0; i < n_states_; ++i)
        for (int j = 0; j < n_states_; ++j) env_counts_[i][j] += other.env_counts_[i][j];
    total_ += other.total_;
}

int64_t TransitionModel::action_count(int action, int from, int to) const {
    return action_counts_.at(static_cast<size_t>(action))
        .at(static_cast<size_t>(from))
        .at(static_cast<size_t>(to));
}

int64_t TransitionModel::env_count(int from, int to) const {
    return env_counts_.at(static_cast<size_t>(from)).at(static_cast<size_t>(to));
}

int64_t TransitionModel::active_events_from(int state) const {
    int64_t s = 0;
    for (int k = 0; k < n_actions_; ++k)
        for (int j = 0; j < n_states_; ++j) s += action_counts_[k][state][j];
    return s;
}

int64_t TransitionModel::env_events_from(int state) const {
    int64_t s = 0;
    for (int j = 0; j < n_states_; ++j) s += env_counts_[state][j];
    return s;
}

int64_t TransitionModel::total_events() const { return total_; }

namespace {

Matrix normalize_rows_or_zero(const std::vector<std::vector<int64_t>>& counts) {
    const int n = static_cast<int>(counts.size());
    Matrix m = zeros(n, n);
    for (int i = 0; i < n; ++i) {
        int64_t total = 0;
        for (int j = 0; j < n; ++j) total += counts[i][j];
        if (total == 0) continue;
        for (int j = 0; j < n; ++j)
            m[i][j] = static_cast<double>(counts[i][j]) / static_cast<double>(total);
    }
    return m;
}

}  // namespace

Matrix TransitionModel::action_matrix(int action) const {
    return normalize_rows_or_zero(action_counts_.at(static_cast<size_t>(action)));
}

Matrix TransitionModel::env_matrix() const { return normalize_rows_or_zero(env_counts_); }

std::vector<double> TransitionModel::alpha(double alpha_prior) const {
    std::vector<double> a(static_cast<size_t>(n_states_), alpha_prior);
    for (int i = 0; i < n_states_; ++i) {
        int64_t active = active_events_from(i);
        int64_t env = env_events_from(i);
        if (active + env > 0)
            a[static_cast<size_t>(i)] =
                static_cast<double>(active) / static_cast<double>(active + env);
    }
    return a;
}

std::string TransitionModel::to_json() const {
    nlohmann::json j;
    j["n_states"] = n_states_;
    j["n_actions"] = n_actions_;
    j["action_counts"] = action_counts_;
    j["env_counts"] = env_counts_;
    j["alpha"] = alpha();
    return j.dump();
}

TransitionModel TransitionModel::from_json(const std::string& json) {
    nlohmann::json j = nlohmann::json::parse(json);
    TransitionModel m(j.at("n_states").get<int>(), j.at("n_actions").get<int>());
    auto ac = j.at("action_counts").get<std::vector<std::vector<std::vector<int64_t>>>>();
    auto ec = j.at("env_counts").get<std::vector<std::vector<int64_t>>>();
    if (static_cast<int>(ac.size()) != m.n_actions_ || static_cast<int>(ec.size()) != m.n_states_)
        throw ConfigError("transition model JSON shape mismatch");
    m.action_counts_ = std::move(ac);
    m.env_counts_ = std::move(ec);
    m.total_ = 0;
    for (int k = 0; k < m.n_actions_; ++k)
        for (int i = 0; i < m.n_states_; ++i)
            for (int j2 = 0; j2 < m.n_states_; ++j2) m.total_ += m.action_counts_[k][i][j2];
    for (int i = 0; i < m.n_states_; ++i)
        for (int j2 = 0; j2 < m.n_states_; ++j2) m.total_ += m.env_counts_[i][j2];
    return m;
}

TransitionModel estimate(const std::vector<TransitionEvent>& events, int n_states, int n_actions) {
    TransitionModel m(n_states, n_actions);
    m.add_events(events);
    return m;
}

Matrix compose_H(const TransitionModel& model, const Policy& policy) {
    if (policy.n_states() != model.n_states() || policy.n_actions() != model.n_actions())
        throw ConfigError("policy shape does not match transition model");
    const int n = model.n_states();
    Matrix h = zeros(n, n);
    for (int k = 0; k < model.n_actions(); ++k) {
        Matrix a = model.action_matrix(k);
        for (int i = 0; i < n; ++i) {
            double p = policy.row(i)[static_cast<size_t>(k)];
            if (p == 0.0) continue;
            for (int j = 0; j < n; ++j) h[i][j] += a[i][j] * p;
        }
    }
    for (int i = 0; i < n; ++i) {
        double mass = row_sum(h, i);
        if (mass <= 0.0) continue;
        for (int j = 0; j < n; ++j) h[i][j] /= mass;
    }
    return h;
}

Matrix compose_G(const Matrix& h, const Matrix& e, const std::vector<double>& alpha) {
    const int n = static_cast<int>(h.size());
    Matrix g = zeros(n, n);
    for (int i = 0; i < n; ++i) {
        double a = alpha[static_cast<size_t>(i)];
        for (int j = 0; j < n; ++j) g[i][j] = a * h[i][j] + (1.0 - a) * e[i][j];
        double mass = row_sum(g, i);
        if (mass <= 0.0) {
            for (int j = 0; j < n; ++j) g[i][j] = 1.0 / static_cast<double>(n);
        } else {
            for (int j = 0; j < n; ++j) g[i][j] /= mass;
        }
    }
    return g;
}

Matrix compose_G(const TransitionModel& model, const Policy& policy, double alpha_prior) {
    return compose_G(compose_H(model, policy), model.env_matrix(), model.alpha(alpha_prior));
}

std::vector<double> convergence_trace(const std::vector<std::vector<TransitionEvent>>& event_batches,
                                      int n_states, int n_actions) {
    if (event_batches.size() < 2)
        throw ConfigError("convergence trace needs at least two event batches");

    auto derived = [&](const TransitionModel& m) {
        std::vector<Matrix> out;
        for (int k = 0; k < n_actions; ++k) out.push_back(m.action_matrix(k));
        out.push_back(m.env_matrix());
        return out;
    };

    TransitionModel final_model(n_states, n_actions);
    for (const auto& batch : event_batches) final_model.add_events(batch);
    std::vector<Matrix> final_probs = derived(final_model);

    std::vector<double> trace;
    TransitionModel running(n_states, n_actions);
    for (const auto& batch : event_batches) {
        running.add_events(batch);
        std::vector<Matrix> now = derived(running);
        double sup = 0.0;
        for (size_t m = 0; m < now.size(); ++m)
            for (int i = 0; i < n_states; ++i)
                for (int j = 0; j < n_states; ++j)
                    sup = std::max(sup, std::abs(now[m][i][j] - final_probs[m][i][j]));
        trace.push_back(sup);
    }
    return trace;
}

}  // namespace swarmsynth
