#include "evolve.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "pagerank.hpp"

using namespace swarmsynth;

namespace {

double one_max(const Genome& g, const EvalContext&) {
    double s = 0;
    for (double v : g) s += v;
    return s;
}

TransitionEvent mk(int from, int to, int action) {
    TransitionEvent e;
    e.from_state = from;
    e.to_state = to;
    e.cause = action >= 0 ? TransitionCause::action : TransitionCause::environment;
    e.action = action;
    return e;
}

// Two states, two actions. Action 1 always leads to state 1 (the desired
// one), action 0 always leads back to state 0. Environment shuffles.
TransitionModel toy_model() {
    TransitionModel m(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int rep = 0; rep < 10; ++rep) {
            m.add_event(mk(i, 1, 1));
            m.add_event(mk(i, 0, 0));
            m.add_event(mk(i, 1 - i, -1));
        }
    return m;
}

}  // namespace

TEST_SUITE("evolve") {

TEST_CASE("one-max is solved within 50 generations") {
    GenomeSpec spec = GenomeSpec::binary(20);
    GAConfig cfg;
    cfg.population = 100;
    cfg.generations = 50;
    cfg.seed = 1;
    EvolveResult res = evolve(spec, one_max, cfg);
    CHECK(res.best_fitness == doctest::Approx(20.0));
}

TEST_CASE("best-so-far history is non-decreasing, even with noisy fitness") {
    GenomeSpec spec = GenomeSpec::binary(12);
    GAConfig cfg;
    cfg.population = 20;
    cfg.generations = 25;
    cfg.evaluations_per_candidate = 3;
    cfg.seed = 3;
    FitnessFn noisy = [](const Genome& g, const EvalContext& ctx) {
        Rng r(ctx.seed);
        double s = 0;
        for (double v : g) s += v;
        return s + r.uniform(-0.5, 0.5);
    };
    EvolveResult res = evolve(spec, noisy, cfg);
    for (size_t i = 1; i < res.history.size(); ++i)
        CHECK(res.history[i].best >= res.history[i - 1].best);
}

TEST_CASE("fixed seed gives identical runs") {
    GenomeSpec spec = GenomeSpec::binary(16);
    GAConfig cfg;
    cfg.population = 30;
    cfg.generations = 12;
    cfg.seed = 9;
    EvolveResult a = evolve(spec, one_max, cfg);
    EvolveResult b = evolve(spec, one_max, cfg);
    CHECK(a.best == b.best);
    REQUIRE(a.history.size() == b.history.size());
    for (size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].best == b.history[i].best);
        CHECK(a.history[i].mean == b.history[i].mean);
    }
    cfg.jobs = 2;  // parallel evaluation must not change anything
    EvolveResult c = evolve(spec, one_max, cfg);
    CHECK(c.best == a.best);
}

TEST_CASE("project_stochastic_row respects the floor and sums to one") {
    std::vector<double> row = {0.9, 0.05, 0.0, -0.2};
    project_stochastic_row(row, 0.05);
    double sum = 0;
    for (double v : row) {
        CHECK(v >= 0.05 - 1e-12);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

    std::vector<double> zeros_row = {0.0, 0.0, 0.0};
    project_stochastic_row(zeros_row, 0.1);
    for (double v : zeros_row) CHECK(v == doctest::Approx(1.0 / 3));

    std::vector<double> tiny = {1e-12, 1.0};
    project_stochastic_row(tiny, 0.01);
    CHECK(tiny[0] == doctest::Approx(0.01));
    CHECK(tiny[1] == doctest::Approx(0.99));

    std::vector<double> bad = {0.5, 0.5};
    CHECK_THROWS_AS(project_stochastic_row(bad, 0.6), ConfigError);
}

TEST_CASE("stochastic genomes stay row-stochastic through every variation") {
    GenomeSpec spec = GenomeSpec::stochastic(4, 3, 0.02);
    GAConfig cfg;
    cfg.population = 16;
    cfg.generations = 15;
    cfg.seed = 10;
    FitnessFn checking = [&](const Genome& g, const EvalContext&) {
        double score = 0;
        for (int r = 0; r < spec.rows; ++r) {
            double sum = 0;
            for (int c = 0; c < spec.cols; ++c) {
                double v = g[static_cast<size_t>(r * spec.cols + c)];
                CHECK(v >= spec.floor_eps - 1e-12);
                sum += v;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
            score += g[static_cast<size_t>(r * spec.cols)];
        }
        return score;
    };
    evolve(spec, checking, cfg);
}

TEST_CASE("failing fitness aborts with the genome serialized") {
    GenomeSpec spec = GenomeSpec::binary(4);
    GAConfig cfg;
    cfg.population = 4;
    cfg.generations = 2;
    cfg.seed = 2;
    FitnessFn bad = [](const Genome&, const EvalContext&) -> double {
        throw std::runtime_error("deliberate");
    };
    try {
        evolve(spec, bad, cfg);
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        std::string what = e.what();
        CHECK(what.find("deliberate") != std::string::npos);
        CHECK(what.find("genome") != std::string::npos);
        CHECK(what.find('[') != std::string::npos);
    }
}

TEST_CASE("population checkpoints are written when configured") {
    GenomeSpec spec = GenomeSpec::binary(6);
    GAConfig cfg;
    cfg.population = 8;
    cfg.generations = 5;
    cfg.seed = 4;
    cfg.checkpoint_dir = "build_test_artifacts/ga_ckpt";
    cfg.checkpoint_every = 2;
    std::filesystem::remove_all(cfg.checkpoint_dir);
    evolve(spec, one_max, cfg);
    CHECK(std::filesystem::exists(cfg.checkpoint_dir + "/population_0.json"));
    CHECK(std::filesystem::exists(cfg.checkpoint_dir + "/population_2.json"));
    CHECK(std::filesystem::exists(cfg.checkpoint_dir + "/population_4.json"));
}

TEST_CASE("policy optimization matches an exhaustive grid on the toy model") {
    TransitionModel model = toy_model();
    DesiredStateSet desired;
    desired.members = {1};
    const double eps = 0.01;

    GAConfig cfg;
    cfg.population = 40;
    cfg.generations = 60;
    cfg.seed = 12;
    PolicyOptimization opt = optimize_policy_pr(model, TaskId::A, desired, cfg, eps);

    // Grid oracle at 0.01 resolution over the two take-action probabilities.
    auto fitness_of = [&](double p0, double p1) {
        Policy p(TaskId::A, {{1.0 - p0, p0}, {1.0 - p1, p1}});
        return fitness_pr(pagerank(compose_G(model, p)), desired);
    };
    double best = -1e300, best_p0 = 0, best_p1 = 0;
    for (double p0 = eps; p0 <= 1.0 - eps + 1e-12; p0 += 0.01)
        for (double p1 = eps; p1 <= 1.0 - eps + 1e-12; p1 += 0.01) {
            double f = fitness_of(p0, p1);
            if (f > best) {
                best = f;
                best_p0 = p0;
                best_p1 = p1;
            }
        }
    CHECK(std::abs(opt.policy.row(0)[1] - best_p0) <= 0.011);
    CHECK(std::abs(opt.policy.row(1)[1] - best_p1) <= 0.011);
    CHECK(opt.fitness == doctest::Approx(best).epsilon(0.01));
    CHECK(opt.policy.row(0)[1] == doctest::Approx(1.0 - eps).epsilon(1e-6));

    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) CHECK(opt.policy.row(s)[static_cast<size_t>(a)] >= eps - 1e-12);
}

TEST_CASE("epsilon zero is permitted; bad inputs are rejected") {
    TransitionModel model = toy_model();
    DesiredStateSet desired;
    desired.members = {1};
    GAConfig cfg;
    cfg.population = 10;
    cfg.generations = 5;
    cfg.seed = 6;
    CHECK_NOTHROW(optimize_policy_pr(model, TaskId::A, desired, cfg, 0.0));
    CHECK_THROWS_AS(optimize_policy_pr(model, TaskId::A, desired, cfg, 0.5), ConfigError);
    DesiredStateSet empty;
    CHECK_THROWS_AS(optimize_policy_pr(model, TaskId::A, empty, cfg, 0.01), ConfigError);
}

TEST_CASE("degenerate model yields the uniform policy with a warning flag") {
    TransitionModel empty(3, 2);
    DesiredStateSet desired;
    desired.members = {0};
    GAConfig cfg;
    cfg.population = 8;
    cfg.generations = 3;
    cfg.seed = 5;
    PolicyOptimization opt = optimize_policy_pr(empty, TaskId::A, desired, cfg, 0.01);
    CHECK(opt.degenerate_model);
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a)
            CHECK(opt.policy.row(s)[static_cast<size_t>(a)] == doctest::Approx(0.5));
}

TEST_CASE("optimized policy beats the random-policy F_pr median") {
    Rng rng(88);
    TransitionModel model(6, 2);
    for (int i = 0; i < 6; ++i)
        for (int rep = 0; rep < 8; ++rep) {
            model.add_event(mk(i, rng.uniform_int(6), rng.uniform_int(2)));
            model.add_event(mk(i, rng.uniform_int(6), -1));
        }
    DesiredStateSet desired;
    desired.members = {2, 4};
    GAConfig cfg;
    cfg.population = 30;
    cfg.generations = 40;
    cfg.seed = 17;
    PolicyOptimization opt = optimize_policy_pr(model, TaskId::A, desired, cfg, 0.01);

    LocalStateSpace space{TaskId::A, 6, std::vector<std::string>(6, "s")};
    ActionSpace actions{TaskId::A, 2, {"a", "b"}, {1.0, 0.0}};
    std::vector<double> random_scores;
    for (int i = 0; i < 30; ++i) {
        Policy p = uniform_random_policy(space, actions, 1000 + static_cast<uint64_t>(i));
        random_scores.push_back(fitness_pr(pagerank(compose_G(model, p)), desired));
    }
    std::sort(random_scores.begin(), random_scores.end());
    double median = random_scores[random_scores.size() / 2];
    CHECK(opt.fitness > median);
}

}  // TEST_SUITE
