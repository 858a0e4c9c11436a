#include "core.hpp"

#include <cmath>
#include <set>

#include "doctest.h"

using namespace swarmsynth;

TEST_SUITE("core") {

TEST_CASE("uniform_random_policy single cell is deterministic one") {
    LocalStateSpace space{TaskId::A, 1, {"only"}};
    ActionSpace actions{TaskId::A, 1, {"act"}, {1.0}};
    Policy p = uniform_random_policy(space, actions, 123);
    CHECK(p.n_states() == 1);
    CHECK(p.n_actions() == 1);
    CHECK(p.row(0)[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("uniform_random_policy rows are stochastic and reproducible") {
    LocalStateSpace space = state_space_for(TaskId::A);
    ActionSpace actions = action_space_for(TaskId::A);
    Policy a = uniform_random_policy(space, actions, 7);
    Policy b = uniform_random_policy(space, actions, 7);
    Policy c = uniform_random_policy(space, actions, 8);
    CHECK(a.n_states() == 8);
    for (int s = 0; s < a.n_states(); ++s) {
        double sum = 0;
        for (double v : a.row(s)) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(a.table() == b.table());  // same seed, bit-identical
    CHECK(a.table() != c.table());
}

TEST_CASE("policy invariants are enforced at construction") {
    CHECK_THROWS_AS(Policy(TaskId::A, {{0.5, 0.4}}), ConfigError);          // sums to 0.9
    CHECK_THROWS_AS(Policy(TaskId::A, {{1.2, -0.2}}), ConfigError);        // out of range
    CHECK_THROWS_AS(Policy(TaskId::A, {{1.0}, {0.5, 0.5}}), ConfigError);  // ragged
    CHECK_THROWS_AS(Policy(TaskId::A, Matrix{}), ConfigError);
    Policy ok(TaskId::A, {{0.25, 0.75}, {1.0, 0.0}});
    CHECK_THROWS_AS(ok.row(2), std::out_of_range);
}

TEST_CASE("sampling from a deterministic row always picks the unit action") {
    Rng rng(99);
    std::vector<double> row = {0.0, 1.0};
    for (int i = 0; i < 100; ++i) CHECK(sample_index(row, rng) == 1);
}

TEST_CASE("sampling sequences are reproducible for a fixed seed") {
    std::vector<double> row = {0.5, 0.5};
    Rng a(42), b(42);
    for (int i = 0; i < 50; ++i) CHECK(sample_index(row, a) == sample_index(row, b));
}

TEST_CASE("policy JSON round-trips bit-exactly and keeps the schema") {
    LocalStateSpace space = state_space_for(TaskId::B1);
    ActionSpace actions = action_space_for(TaskId::B1);
    Policy p = uniform_random_policy(space, actions, 11);
    std::string json = p.to_json();
    Policy q = Policy::from_json(json);
    CHECK(p.table() == q.table());
    CHECK(p.hash() == q.hash());
    CHECK(json.find("\"task\":\"B1\"") != std::string::npos);
    CHECK(json.find("\"n_states\":16") != std::string::npos);
    CHECK(json.find("\"n_actions\":8") != std::string::npos);
}

TEST_CASE("desired state set JSON uses the task/desired schema") {
    DesiredStateSet s;
    s.members = {1, 2, 5};
    std::string json = s.to_json(TaskId::A);
    CHECK(json == R"({"desired":[1,2,5],"task":"A"})");
    DesiredStateSet t = DesiredStateSet::from_json(json);
    CHECK(t.members == s.members);
    CHECK(t.contains(2));
    CHECK(!t.contains(3));
}

TEST_CASE("state distribution validation") {
    StateDistribution d;
    d.values = {0.25, 0.75};
    CHECK_NOTHROW(d.validate());
    d.values = {0.25, 0.25};
    CHECK_THROWS_AS(d.validate(), ConfigError);
    d.normalization = StateDistribution::Normalization::counts;
    CHECK_NOTHROW(d.validate());
    d.values = {-1.0, 2.0};
    CHECK_THROWS_AS(d.validate(), ConfigError);
}

TEST_CASE("rng streams are deterministic and children are independent") {
    Rng a(5), b(5);
    for (int i = 0; i < 20; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(mix_seed(5, 0) != mix_seed(5, 1));
    CHECK(mix_seed(5, 0) == mix_seed(5, 0));

    Rng u(17);
    for (int i = 0; i < 1000; ++i) {
        double x = u.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        int k = u.uniform_int(7);
        CHECK(k >= 0);
        CHECK(k < 7);
    }
}

TEST_CASE("rng normal moments are sane") {
    Rng g(3);
    double sum = 0, sum2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double x = g.normal();
        sum += x;
        sum2 += x * x;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sum2 / n - 1.0) < 0.05);
}

TEST_CASE("parallel_for result does not depend on the job count") {
    std::vector<int> one(100), four(100);
    parallel_for(100, 1, [&](int i) { one[static_cast<size_t>(i)] = i * i; });
    parallel_for(100, 4, [&](int i) { four[static_cast<size_t>(i)] = i * i; });
    CHECK(one == four);
    CHECK_THROWS(parallel_for(4, 2, [](int i) {
        if (i == 3) throw std::runtime_error("boom");
    }));
}

}  // TEST_SUITE
