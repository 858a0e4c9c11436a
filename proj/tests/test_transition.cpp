#include "transition.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"

using namespace swarmsynth;

namespace {

TransitionEvent ev(int from, int to, int action) {
    TransitionEvent e;
    e.from_state = from;
    e.to_state = to;
    e.cause = TransitionCause::action;
    e.action = action;
    return e;
}

TransitionEvent env_ev(int from, int to) {
    TransitionEvent e;
    e.from_state = from;
    e.to_state = to;
    e.cause = TransitionCause::environment;
    return e;
}

// Random fully-observed model: every (state, action) row gets count mass.
TransitionModel random_full_model(int n, int m, Rng& rng) {
    TransitionModel model(n, m);
    for (int k = 0; k < m; ++k)
        for (int i = 0; i < n; ++i)
            for (int rep = 0; rep < 6; ++rep) {
                int j = rng.uniform_int(n);
                TransitionEvent e = ev(i, j, k);
                model.add_event(e);
            }
    for (int i = 0; i < n; ++i)
        for (int rep = 0; rep < 4; ++rep) model.add_event(env_ev(i, rng.uniform_int(n)));
    return model;
}

Policy random_policy_for(int n, int m, uint64_t seed) {
    LocalStateSpace space{TaskId::A, n, std::vector<std::string>(static_cast<size_t>(n), "s")};
    ActionSpace actions{TaskId::A, m, std::vector<std::string>(static_cast<size_t>(m), "a"),
                        std::vector<double>(static_cast<size_t>(m), 0.0)};
    return uniform_random_policy(space, actions, seed);
}

}  // namespace

TEST_SUITE("transition") {

TEST_CASE("counts normalize to maximum-likelihood rows") {
    std::vector<TransitionEvent> events = {ev(0, 1, 0), ev(0, 1, 0), ev(0, 2, 0)};
    TransitionModel m = estimate(events, 4, 2);
    Matrix a0 = m.action_matrix(0);
    CHECK(a0[0][0] == 0.0);
    CHECK(a0[0][1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(a0[0][2] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(a0[0][3] == 0.0);
    CHECK(row_sum(m.action_matrix(1), 0) == 0.0);  // unobserved action row stays zero
}

TEST_CASE("alpha is the bounded active fraction with a 0.5 prior") {
    std::vector<TransitionEvent> events = {ev(0, 1, 0), ev(0, 2, 0), env_ev(1, 0), ev(1, 2, 1)};
    TransitionModel m = estimate(events, 4, 2);
    auto alpha = m.alpha();
    CHECK(alpha[0] == doctest::Approx(1.0));        // only active events at 0
    CHECK(alpha[1] == doctest::Approx(0.5));        // one active, one env
    CHECK(alpha[2] == doctest::Approx(0.5));        // never seen: prior
    CHECK(m.alpha(0.25)[3] == doctest::Approx(0.25));
    for (double a : alpha) {
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
    }
}

TEST_CASE("estimation is permutation invariant") {
    Rng rng(31);
    std::vector<TransitionEvent> events;
    for (int i = 0; i < 500; ++i) {
        if (rng.uniform() < 0.6)
            events.push_back(ev(rng.uniform_int(5), rng.uniform_int(5), rng.uniform_int(3)));
        else
            events.push_back(env_ev(rng.uniform_int(5), rng.uniform_int(5)));
    }
    TransitionModel a = estimate(events, 5, 3);
    std::vector<TransitionEvent> shuffled = events;
    rng.shuffle(shuffled);
    TransitionModel b = estimate(shuffled, 5, 3);
    CHECK(a.to_json() == b.to_json());
}

TEST_CASE("index range errors are rejected") {
    TransitionModel m(3, 2);
    CHECK_THROWS_AS(m.add_event(ev(0, 3, 0)), std::out_of_range);
    CHECK_THROWS_AS(m.add_event(ev(0, 1, 2)), std::out_of_range);
}

TEST_CASE("compose_H collapses to A_1 for a single deterministic action") {
    std::vector<TransitionEvent> events = {ev(0, 1, 0), ev(1, 0, 0), ev(1, 2, 0), ev(2, 0, 0)};
    TransitionModel m = estimate(events, 3, 1);
    Policy p(TaskId::A, {{1.0}, {1.0}, {1.0}});
    Matrix h = compose_H(m, p);
    Matrix a0 = m.action_matrix(0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(h[i][j] == doctest::Approx(a0[i][j]).epsilon(1e-12));
}

TEST_CASE("compose_H renormalizes over observed action mass") {
    // State 0: action 0 observed (goes to 1), action 1 never observed.
    std::vector<TransitionEvent> events = {ev(0, 1, 0)};
    TransitionModel m = estimate(events, 2, 2);
    Policy p(TaskId::A, {{0.5, 0.5}, {0.5, 0.5}});
    Matrix h = compose_H(m, p);
    CHECK(h[0][1] == doctest::Approx(1.0).epsilon(1e-12));  // renormalized from 0.5
    CHECK(row_sum(h, 1) == 0.0);                            // fully unobserved row stays zero
}

TEST_CASE("compose_H equals the element-wise double-loop oracle") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 3 + rng.uniform_int(8);
        int m = 1 + rng.uniform_int(4);
        TransitionModel model = random_full_model(n, m, rng);
        Policy pol = random_policy_for(n, m, rng.next_u64());
        Matrix h = compose_H(model, pol);

        std::vector<Matrix> a;
        for (int k = 0; k < m; ++k) a.push_back(model.action_matrix(k));
        for (int i = 0; i < n; ++i) {
            std::vector<double> row(static_cast<size_t>(n), 0.0);
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < m; ++k)
                    row[static_cast<size_t>(j)] +=
                        a[static_cast<size_t>(k)][static_cast<size_t>(i)][static_cast<size_t>(j)] *
                        pol.row(i)[static_cast<size_t>(k)];
            double mass = 0.0;
            for (double v : row) mass += v;
            if (mass > 0.0)
                for (double& v : row) v /= mass;
            for (int j = 0; j < n; ++j)
                CHECK(std::abs(h[static_cast<size_t>(i)][static_cast<size_t>(j)] -
                               row[static_cast<size_t>(j)]) <= 1e-12);
        }
    }
}

TEST_CASE("compose_G mixes by alpha and patches dangling rows") {
    // alpha == 1 everywhere it matters: no env events.
    std::vector<TransitionEvent> active_only = {ev(0, 1, 0), ev(1, 0, 0)};
    TransitionModel m1 = estimate(active_only, 3, 1);
    Policy p1(TaskId::A, {{1.0}, {1.0}, {1.0}});
    Matrix g1 = compose_G(m1, p1);
    Matrix h1 = compose_H(m1, p1);
    for (int j = 0; j < 3; ++j) {
        CHECK(g1[0][static_cast<size_t>(j)] == doctest::Approx(h1[0][static_cast<size_t>(j)]));
        CHECK(g1[2][static_cast<size_t>(j)] == doctest::Approx(1.0 / 3.0));  // dangling patch
    }

    // alpha == 0: only environment events.
    std::vector<TransitionEvent> env_only = {env_ev(0, 2), env_ev(1, 2), env_ev(2, 0)};
    TransitionModel m2 = estimate(env_only, 3, 1);
    Policy p2(TaskId::A, {{1.0}, {1.0}, {1.0}});
    Matrix g2 = compose_G(m2, p2);
    Matrix e2 = m2.env_matrix();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(g2[static_cast<size_t>(i)][static_cast<size_t>(j)] ==
                  doctest::Approx(e2[static_cast<size_t>(i)][static_cast<size_t>(j)]));

    // every row of G is stochastic even when H and E disagree on support
    Rng rng(5);
    TransitionModel m3 = random_full_model(5, 2, rng);
    Matrix g3 = compose_G(m3, random_policy_for(5, 2, 9));
    for (int i = 0; i < 5; ++i) CHECK(row_sum(g3, i) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("model JSON persists counts as the source of truth") {
    Rng rng(13);
    TransitionModel m = random_full_model(4, 3, rng);
    std::string json = m.to_json();
    CHECK(json.find("\"action_counts\"") != std::string::npos);
    CHECK(json.find("\"env_counts\"") != std::string::npos);
    CHECK(json.find("\"alpha\"") != std::string::npos);
    TransitionModel back = TransitionModel::from_json(json);
    CHECK(back.to_json() == json);
    CHECK(back.total_events() == m.total_events());
}

TEST_CASE("merge adds counts associatively") {
    Rng rng(21);
    std::vector<TransitionEvent> events;
    for (int i = 0; i < 200; ++i)
        events.push_back(ev(rng.uniform_int(4), rng.uniform_int(4), rng.uniform_int(2)));
    TransitionModel whole = estimate(events, 4, 2);
    TransitionModel first = estimate({events.begin(), events.begin() + 90}, 4, 2);
    TransitionModel second = estimate({events.begin() + 90, events.end()}, 4, 2);
    first.merge(second);
    CHECK(first.to_json() == whole.to_json());
}

TEST_CASE("convergence trace ends at zero and detects identical batches") {
    std::vector<TransitionEvent> batch = {ev(0, 1, 0), ev(1, 2, 0), env_ev(2, 0)};
    std::vector<std::vector<TransitionEvent>> batches = {batch, batch};
    auto trace = convergence_trace(batches, 3, 1);
    REQUIRE(trace.size() == 2);
    CHECK(trace[0] == doctest::Approx(0.0));  // same empirical frequencies already
    CHECK(trace[1] == doctest::Approx(0.0));

    std::vector<std::vector<TransitionEvent>> mixed = {{ev(0, 1, 0)}, {ev(0, 2, 0)},
                                                       {ev(0, 1, 0), ev(0, 2, 0)}};
    auto t2 = convergence_trace(mixed, 3, 1);
    CHECK(t2.back() == doctest::Approx(0.0));
    for (double v : t2) CHECK(v >= 0.0);
    CHECK(t2[0] > 0.0);

    CHECK_THROWS_AS(convergence_trace({batch}, 3, 1), ConfigError);
}

TEST_CASE("estimator recovers a known synthetic model (small scale)") {
    // A_0 rows one-hot, E uniform over two targets, alpha 0.7.
    const int n = 4;
    Rng rng(404);
    std::vector<TransitionEvent> events;
    for (int i = 0; i < 2000; ++i) {
        int s = rng.uniform_int(n);
        if (rng.uniform() < 0.7) {
            events.push_back(ev(s, (s + 1) % n, 0));
        } else {
            events.push_back(env_ev(s, rng.uniform() < 0.5 ? (s + 2) % n : (s + 3) % n));
        }
    }
    TransitionModel m = estimate(events, n, 1);
    Matrix a0 = m.action_matrix(0);
    Matrix e = m.env_matrix();
    auto alpha = m.alpha();
    for (int s = 0; s < n; ++s) {
        CHECK(a0[static_cast<size_t>(s)][static_cast<size_t>((s + 1) % n)] == doctest::Approx(1.0));
        CHECK(e[static_cast<size_t>(s)][static_cast<size_t>((s + 2) % n)] ==
              doctest::Approx(0.5).epsilon(0.15));
        CHECK(alpha[static_cast<size_t>(s)] == doctest::Approx(0.7).epsilon(0.1));
    }
}

}  // TEST_SUITE
