#include "verify.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

#include "json.hpp"

namespace swarmsynth {

std::string deadlock_class_name(DeadlockClass c) {
    switch (c) {
        case DeadlockClass::no_deadlock: return "no_deadlock";
        case DeadlockClass::stops_only_in_desired: return "stops_only_in_desired";
        case DeadlockClass::potential_deadlock: return "potential_deadlock";
    }
    return "?";
}

std::vector<int> static_states(const Matrix& h) {
    std::vector<int> out;
    for (size_t i = 0; i < h.size(); ++i)
        if (row_sum(h, static_cast<int>(i)) == 0.0) out.push_back(static_cast<int>(i));
    return out;
}

DeadlockClass classify_deadlock(const std::vector<int>& s_static, const DesiredStateSet& s_des,
                                std::vector<int>* offenders) {
    std::vector<int> outside;
    for (int s : s_static)
        if (!s_des.contains(s)) outside.push_back(s);
    if (offenders) *offenders = outside;
    if (s_static.empty()) return DeadlockClass::no_deadlock;
    if (outside.empty()) return DeadlockClass::stops_only_in_desired;
    return DeadlockClass::potential_deadlock;
}

namespace {

// reachable[i] = set of nodes with a directed path from i (edges where > 0).
// Reflexive: every node reaches itself with the empty path.
std::vector<std::vector<char>> reachability(const Matrix& m) {
    const int n = static_cast<int>(m.size());
    std::vector<std::vector<char>> reach(static_cast<size_t>(n),
                                         std::vector<char>(static_cast<size_t>(n), 0));
    for (int src = 0; src < n; ++src) {
        std::queue<int> q;
        q.push(src);
        std::vector<char>& seen = reach[static_cast<size_t>(src)];
        seen[static_cast<size_t>(src)] = 1;
        std::vector<char> visited(static_cast<size_t>(n), 0);
        visited[static_cast<size_t>(src)] = 1;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int v = 0; v < n; ++v) {
                if (m[static_cast<size_t>(u)][static_cast<size_t>(v)] > 0.0) {
                    seen[static_cast<size_t>(v)] = 1;
                    if (!visited[static_cast<size_t>(v)]) {
                        visited[static_cast<size_t>(v)] = 1;
                        q.push(v);
                    }
                }
            }
        }
    }
    return reach;
}

}  // namespace

PathCheck check_prop1(const Matrix& h, const DesiredStateSet& s_des) {
    if (s_des.members.empty()) throw ConfigError("prop 1 needs a non-empty desired state set");
    const int n = static_cast<int>(h.size());
    auto reach = reachability(h);
    PathCheck out;
    for (int src = 0; src < n; ++src) {
        if (s_des.contains(src)) continue;
        std::vector<int> missing;
        for (int dst : s_des.members)
            if (!reach[static_cast<size_t>(src)][static_cast<size_t>(dst)]) missing.push_back(dst);
        if (!missing.empty()) out.missing.push_back({src, std::move(missing)});
    }
    out.holds = out.missing.empty();
    return out;
}

std::pair<PathCheck, PathCheck> check_prop2(const Matrix& h, const Matrix& e,
                                            const std::vector<int>& s_static,
                                            const DesiredStateSet& s_des) {
    const int n = static_cast<int>(h.size());
    std::vector<char> is_static(static_cast<size_t>(n), 0);
    for (int s : s_static) is_static[static_cast<size_t>(s)] = 1;

    // Condition 1: every static, non-desired state has a direct environment
    // edge to some non-static state.
    PathCheck cond1;
    for (int s : s_static) {
        if (s_des.contains(s)) continue;
        bool exits = false;
        for (int j = 0; j < n && !exits; ++j)
            if (!is_static[static_cast<size_t>(j)] &&
                e[static_cast<size_t>(s)][static_cast<size_t>(j)] > 0.0)
                exits = true;
        if (!exits) {
            std::vector<int> targets;
            for (int j = 0; j < n; ++j)
                if (!is_static[static_cast<size_t>(j)]) targets.push_back(j);
            cond1.missing.push_back({s, std::move(targets)});
        }
    }
    cond1.holds = cond1.missing.empty();

    // Condition 2: from every non-static state there is a path to every state.
    PathCheck cond2;
    auto reach = reachability(h);
    for (int src = 0; src < n; ++src) {
        if (is_static[static_cast<size_t>(src)]) continue;
        std::vector<int> missing;
        for (int dst = 0; dst < n; ++dst)
            if (!reach[static_cast<size_t>(src)][static_cast<size_t>(dst)]) missing.push_back(dst);
        if (!missing.empty()) cond2.missing.push_back({src, std::move(missing)});
    }
    cond2.holds = cond2.missing.empty();
    return {cond1, cond2};
}

Matrix patched_stochastic(const Matrix& m) {
    const int n = static_cast<int>(m.size());
    Matrix out = m;
    for (int i = 0; i < n; ++i) {
        double mass = row_sum(out, i);
        if (mass <= 0.0) {
            for (int j = 0; j < n; ++j) out[static_cast<size_t>(i)][static_cast<size_t>(j)] = 1.0 / n;
        } else {
            for (int j = 0; j < n; ++j) out[static_cast<size_t>(i)][static_cast<size_t>(j)] /= mass;
        }
    }
    return out;
}

PageRankInspection pagerank_inspection(const TransitionModel& model, const Policy& policy,
                                       const TransitionModel* ref_model, const Policy* ref_policy) {
    PageRankInspection out;
    out.active = pagerank(patched_stochastic(compose_H(model, policy))).values;
    out.env = pagerank(patched_stochastic(model.env_matrix())).values;
    if (ref_model || ref_policy) {
        const TransitionModel& rm = ref_model ? *ref_model : model;
        const Policy& rp = ref_policy ? *ref_policy : policy;
        auto ref_active = pagerank(patched_stochastic(compose_H(rm, rp))).values;
        auto ref_env = pagerank(patched_stochastic(rm.env_matrix())).values;
        for (size_t i = 0; i < out.active.size(); ++i) {
            out.active_delta.push_back(out.active[i] - ref_active[i]);
            out.env_delta.push_back(out.env[i] - ref_env[i]);
        }
    }
    return out;
}

VerificationReport verify_policy(const TransitionModel& model, const Policy& policy,
                                 const DesiredStateSet& s_des, const TransitionModel* ref_model,
                                 const Policy* ref_policy, double near_zero_cutoff) {
    VerificationReport rep;
    Matrix h = compose_H(model, policy);
    Matrix e = model.env_matrix();
    rep.s_des = s_des.members;
    rep.s_static = static_states(h);
    rep.deadlock = classify_deadlock(rep.s_static, s_des, &rep.deadlock_offenders);
    rep.prop1 = check_prop1(h, s_des);
    auto p2 = check_prop2(h, e, rep.s_static, s_des);
    rep.prop2_1 = p2.first;
    rep.prop2_2 = p2.second;
    PageRankInspection insp = pagerank_inspection(model, policy, ref_model, ref_policy);
    rep.pagerank_active = insp.active;
    rep.pagerank_env = insp.env;
    rep.pagerank_active_delta = insp.active_delta;
    rep.pagerank_env_delta = insp.env_delta;

    for (int s = 0; s < model.n_states(); ++s)
        if (model.active_events_from(s) + model.env_events_from(s) == 0)
            rep.unobserved_states.push_back(s);
    if (!rep.unobserved_states.empty()) {
        std::ostringstream note;
        note << "no information on states {";
        for (size_t i = 0; i < rep.unobserved_states.size(); ++i)
            note << (i ? "," : "") << rep.unobserved_states[i];
        note << "} (never observed in the event data)";
        rep.notes.push_back(note.str());
    }
    int faint = 0;
    for (int i = 0; i < model.n_states(); ++i)
        for (int j = 0; j < model.n_states(); ++j) {
            double p = h[static_cast<size_t>(i)][static_cast<size_t>(j)];
            if (p > 0.0 && p < near_zero_cutoff) ++faint;
        }
    if (faint > 0)
        rep.notes.push_back(std::to_string(faint) +
                            " H edge(s) below the practical cutoff of " +
                            std::to_string(near_zero_cutoff) +
                            " count as reachable for the formal checks");
    return rep;
}

namespace {

nlohmann::json missing_to_json(const PathCheck& c) {
    nlohmann::json j;
    j["holds"] = c.holds;
    nlohmann::json miss = nlohmann::json::array();
    for (const auto& [from, targets] : c.missing) miss.push_back({{"from", from}, {"to", targets}});
    j["missing_paths"] = miss;
    return j;
}

std::string set_to_string(const std::vector<int>& v) {
    std::ostringstream os;
    os << '{';
    for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << 's' << v[i];
    os << '}';
    return os.str();
}

std::string missing_to_string(const PathCheck& c) {
    if (c.holds) return "-";
    std::ostringstream os;
    for (size_t i = 0; i < c.missing.size(); ++i) {
        if (i) os << ", ";
        os << '(' << c.missing[i].first << ", {";
        const auto& t = c.missing[i].second;
        for (size_t k = 0; k < t.size(); ++k) os << (k ? "," : "") << t[k];
        os << "})";
    }
    return os.str();
}

}  // namespace

std::string VerificationReport::to_json() const {
    nlohmann::json j;
    j["s_static"] = s_static;
    j["s_des"] = s_des;
    j["deadlock_class"] = deadlock_class_name(deadlock);
    j["deadlock_offenders"] = deadlock_offenders;
    j["prop1"] = missing_to_json(prop1);
    j["prop2_1"] = missing_to_json(prop2_1);
    j["prop2_2"] = missing_to_json(prop2_2);
    j["pagerank_active"] = pagerank_active;
    j["pagerank_env"] = pagerank_env;
    if (!pagerank_active_delta.empty()) {
        j["pagerank_active_delta"] = pagerank_active_delta;
        j["pagerank_env_delta"] = pagerank_env_delta;
    }
    j["unobserved_states"] = unobserved_states;
    j["notes"] = notes;
    return j.dump(2);
}

std::string VerificationReport::to_text() const {
    std::ostringstream os;
    os << "Condition | Outcome | Counterexamples\n";
    os << "----------+---------+----------------\n";
    os << "P 1       | " << (prop1.holds ? "True " : "False") << "   | " << missing_to_string(prop1)
       << '\n';
    os << "P 2.1     | " << (prop2_1.holds ? "True " : "False") << "   | "
       << missing_to_string(prop2_1) << '\n';
    os << "P 2.2     | " << (prop2_2.holds ? "True " : "False") << "   | "
       << missing_to_string(prop2_2) << '\n';
    os << '\n';
    os << "S_static = " << set_to_string(s_static) << '\n';
    os << "S_des    = " << set_to_string(s_des) << '\n';
    os << "Deadlock: " << deadlock_class_name(deadlock);
    if (!deadlock_offenders.empty()) os << " (offending: " << set_to_string(deadlock_offenders) << ")";
    os << '\n';
    for (const auto& n : notes) os << "Note: " << n << '\n';
    return os.str();
}

}  // namespace swarmsynth
