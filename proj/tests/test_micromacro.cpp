#include "micromacro.hpp"

#include <cmath>
#include <filesystem>
#include <limits>

#include "csv.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace swarmsynth;

namespace {

MicroMacroModel from_parts(const std::vector<int>& sizes,
                           const std::vector<std::vector<double>>& w,
                           const std::vector<std::vector<double>>& b) {
    nlohmann::json j;
    j["layer_sizes"] = sizes;
    j["weights"] = w;
    j["biases"] = b;
    return MicroMacroModel::from_json(j.dump());
}

// Single linear layer that returns input[index].
MicroMacroModel picker_model(int n, int index) {
    std::vector<double> w(static_cast<size_t>(n), 0.0);
    w[static_cast<size_t>(index)] = 1.0;
    return from_parts({n, 1}, {w}, {{0.0}});
}

MicroMacroModel constant_model(int n, double value) {
    return from_parts({n, 1}, {std::vector<double>(static_cast<size_t>(n), 0.0)}, {{value}});
}

Dataset tiny_dataset(int n_states, const std::vector<std::pair<std::vector<double>, double>>& rows) {
    Dataset d;
    d.n_states = n_states;
    int run = 0;
    for (const auto& [p, t] : rows) {
        Dataset::Pair pair;
        pair.run_id = run;
        pair.t = 0.5 * static_cast<double>(d.pairs.size());
        pair.p = p;
        pair.target = t;
        d.pairs.push_back(pair);
    }
    return d;
}

// Exhaustive argmax over all 2^n binary vectors under the extractor's exact
// ordering: score desc, then fewer members, then lexicographically smaller.
std::vector<int> enumerate_best(const MicroMacroModel& model, int n) {
    std::vector<int> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int mask = 1; mask < (1 << n); ++mask) {
        std::vector<int> members;
        for (int s = 0; s < n; ++s)
            if (mask & (1 << s)) members.push_back(s);
        double score = desired_set_score(model, members);
        bool better = score > best_score;
        if (score == best_score) {
            if (members.size() != best.size())
                better = members.size() < best.size();
            else
                better = members < best;
        }
        if (better) {
            best_score = score;
            best = members;
        }
    }
    return best;
}

}  // namespace

TEST_SUITE("micromacro") {

TEST_CASE("all-zero parameters give zero output") {
    MicroMacroModel m = from_parts({3, 2, 1}, {{0, 0, 0, 0, 0, 0}, {0, 0}}, {{0, 0}, {0}});
    CHECK(m.forward({0.2, 0.3, 0.5}) == 0.0);
    CHECK(m.forward({1.0, 0.0, 0.0}) == 0.0);
}

TEST_CASE("hand-computed two-unit forward pass") {
    // hidden: relu(0.5x0 - x1 + 0.1), relu(0.25x0 + 0.5x1 - 0.2); out: 1.5h0 - 0.5h1 + 0.25
    MicroMacroModel m =
        from_parts({2, 2, 1}, {{0.5, -1.0, 0.25, 0.5}, {1.5, -0.5}}, {{0.1, -0.2}, {0.25}});
    // z0 = -0.5 -> 0; z1 = 0.3; out = -0.5 * 0.3 + 0.25 = 0.1
    CHECK(m.forward({0.4, 0.8}) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("outputs are finite on simplex inputs") {
    MicroMacroModel m(default_layer_sizes(TaskId::A), 3);
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> p(8, 0.0);
        double sum = 0;
        for (auto& v : p) {
            v = rng.uniform();
            sum += v;
        }
        for (auto& v : p) v /= sum;
        CHECK(std::isfinite(m.forward(p)));
    }
    CHECK_THROWS_AS(m.forward({0.5, 0.5}), ConfigError);  // shape mismatch
}

TEST_CASE("analytic gradients match central finite differences") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        MicroMacroModel m({5, 7, 6, 1}, seed);
        Rng rng(seed + 100);
        std::vector<double> input(5);
        for (auto& v : input) v = rng.uniform(-1.0, 1.0);
        double target = rng.uniform(-2.0, 2.0);
        CHECK(gradient_check(m, input, target) < 1e-4);
    }
}

TEST_CASE("halving h shrinks the finite-difference error or hits the noise floor") {
    MicroMacroModel m({4, 6, 1}, 11);
    std::vector<double> input = {0.3, -0.2, 0.9, 0.1};
    double e1 = gradient_check(m, input, 1.5, 1e-4);
    double e2 = gradient_check(m, input, 1.5, 5e-5);
    CHECK((e2 < e1 || e2 < 1e-6));
}

TEST_CASE("dead ReLU units have matching zero gradients") {
    // Negative biases keep every hidden unit off for a zero input.
    MicroMacroModel m = from_parts({2, 2, 1}, {{0.4, 0.4, 0.4, 0.4}, {1.0, 1.0}}, {{-1.0, -1.0}, {0.0}});
    CHECK(gradient_check(m, {0.0, 0.0}, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("training is deterministic and reduces the loss") {
    Rng rng(42);
    Dataset data;
    data.n_states = 4;
    for (int run = 0; run < 4; ++run)
        for (int i = 0; i < 50; ++i) {
            Dataset::Pair p;
            p.run_id = run;
            p.t = 0.5 * i;
            p.p.assign(4, 0.0);
            double sum = 0;
            for (auto& v : p.p) {
                v = rng.uniform();
                sum += v;
            }
            for (auto& v : p.p) v /= sum;
            p.target = 2.0 * p.p[0] + 0.5 * p.p[3];
            data.pairs.push_back(p);
        }
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 40;
    cfg.batch_size = 32;
    cfg.seed = 7;
    cfg.early_stop_plateau = 0;

    MicroMacroModel m1({4, 8, 1}, 5);
    MicroMacroModel m2({4, 8, 1}, 5);
    TrainResult r1 = train(m1, data, {}, cfg);
    TrainResult r2 = train(m2, data, {}, cfg);
    CHECK(m1.weights_checksum() == m2.weights_checksum());
    CHECK(r1.history.back().loss < r1.history.front().loss);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
    Dataset data = tiny_dataset(2, {{{0.5, 0.5}, 1e308}});
    TrainConfig cfg;
    cfg.learning_rate = 1.0;
    cfg.epochs = 3;
    cfg.seed = 1;
    MicroMacroModel m({2, 2, 1}, 3);
    CHECK_THROWS_WITH_AS(train(m, data, {}, cfg), doctest::Contains("non-finite"),
                         std::runtime_error);
}

TEST_CASE("constant targets give NaN correlation, not an error") {
    Dataset data = tiny_dataset(2, {{{0.5, 0.5}, 2.0}, {{0.4, 0.6}, 2.0}, {{0.3, 0.7}, 2.0}});
    MicroMacroModel m({2, 3, 1}, 9);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.learning_rate = 1e-3;
    cfg.seed = 2;
    TrainResult res = train(m, data, {&data}, cfg);
    CHECK(std::isnan(res.history.back().val_r[0]));
    CorrelationResult c = validate_correlation(m, data);
    CHECK(std::isnan(c.mean_r));
    CHECK(c.runs_excluded == 1);
    CHECK(c.runs_used == 0);
}

TEST_CASE("pearson correlation basics and affine invariance") {
    std::vector<double> x = {1, 2, 3, 4, 5};
    std::vector<double> y = {2, 4, 6, 8, 10};
    CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> neg = {-1, -2, -3, -4, -5};
    CHECK(pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-12));
    std::vector<double> affine;
    for (double v : x) affine.push_back(2.0 * v + 3.0);
    CHECK(pearson(x, affine) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> flat = {1, 1, 1, 1, 1};
    CHECK(std::isnan(pearson(x, flat)));
}

TEST_CASE("correlation is computed per run, then averaged") {
    // Two runs, each perfectly correlated with the picker model, but with
    // different offsets so the pooled correlation would be smaller.
    MicroMacroModel m = picker_model(2, 0);
    Dataset d;
    d.n_states = 2;
    for (int i = 0; i < 10; ++i) {
        Dataset::Pair p;
        p.run_id = 0;
        p.t = 0.5 * i;
        p.p = {0.1 + 0.05 * i, 0.9 - 0.05 * i};
        p.target = 10.0 + i;
        d.pairs.push_back(p);
    }
    for (int i = 0; i < 10; ++i) {
        Dataset::Pair p;
        p.run_id = 1;
        p.t = 0.5 * i;
        p.p = {0.1 + 0.05 * i, 0.9 - 0.05 * i};
        p.target = -50.0 + i;
        d.pairs.push_back(p);
    }
    CorrelationResult c = validate_correlation(m, d);
    CHECK(c.runs_used == 2);
    CHECK(c.mean_r == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("extraction finds the single input the model rewards") {
    MicroMacroModel m = picker_model(8, 3);
    GAConfig ga;
    ga.population = 64;
    ga.generations = 40;
    ga.seed = 3;
    DesiredStateSet s = extract_desired_states(m, ga);
    CHECK(s.members == std::vector<int>{3});
    CHECK(s.source == DesiredStateSet::Source::extracted);
    CHECK(enumerate_best(m, 8) == s.members);
}

TEST_CASE("constant model tie-breaks to the singleton {0}") {
    MicroMacroModel m = constant_model(8, 4.2);
    GAConfig ga;
    ga.population = 64;
    ga.generations = 40;
    ga.seed = 5;
    DesiredStateSet s = extract_desired_states(m, ga);
    CHECK(s.members == std::vector<int>{0});
    CHECK(enumerate_best(m, 8) == s.members);
}

TEST_CASE("extraction equals exhaustive enumeration on random small models") {
    for (uint64_t seed = 0; seed < 8; ++seed) {
        MicroMacroModel m({8, 10, 1}, seed + 50);
        GAConfig ga;
        ga.population = 64;
        ga.generations = 60;
        ga.seed = seed;
        DesiredStateSet s = extract_desired_states(m, ga);
        CHECK(s.members == enumerate_best(m, 8));
    }
}

TEST_CASE("unexplored states are dropped from the extracted set") {
    MicroMacroModel m = picker_model(8, 3);
    GAConfig ga;
    ga.population = 32;
    ga.generations = 20;
    ga.seed = 2;
    std::vector<int> explored = {0, 1, 2};  // state 3 was never seen
    DesiredStateSet s = extract_desired_states(m, ga, &explored);
    CHECK(s.members.empty());
    std::vector<int> explored2 = {0, 1, 2, 3};
    DesiredStateSet s2 = extract_desired_states(m, ga, &explored2);
    CHECK(s2.members == std::vector<int>{3});
}

TEST_CASE("model JSON round-trips bit-exactly") {
    MicroMacroModel m(default_layer_sizes(TaskId::B1), 77);
    MicroMacroModel back = MicroMacroModel::from_json(m.to_json());
    CHECK(back.weights_checksum() == m.weights_checksum());
    CHECK(back.layer_sizes() == m.layer_sizes());
    CHECK_THROWS_AS(MicroMacroModel::from_json(R"({"layer_sizes":[2,1],"weights":[[1,2,3]],"biases":[[0]]})"),
                    ConfigError);
}

TEST_CASE("training history CSV has the documented columns") {
    std::vector<TrainHistoryRow> rows = {{0, 0.5, {0.1, 0.2, 0.3}}, {1, 0.4, {0.2}}};
    std::string path = "build_test_artifacts/train_history.csv";
    std::filesystem::remove(path);
    write_train_history_csv(path, rows);
    CsvTable t = read_csv(path);
    CHECK(t.header == std::vector<std::string>{"epoch", "vs1_r", "vs2_r", "vs3_r", "loss"});
    REQUIRE(t.rows.size() == 2);
    CHECK(parse_double(t.rows[0][1]) == doctest::Approx(0.1));
    CHECK(parse_double(t.rows[0][4]) == doctest::Approx(0.5));
    CHECK(t.rows[1][2] == "nan");
}

TEST_CASE("published model shapes and learning rates per task") {
    CHECK(default_layer_sizes(TaskId::A) == std::vector<int>{8, 30, 30, 30, 1});
    CHECK(default_layer_sizes(TaskId::B1) == std::vector<int>{16, 30, 30, 30, 1});
    CHECK(default_layer_sizes(TaskId::B2) == std::vector<int>{16, 30, 30, 30, 1});
    CHECK(default_layer_sizes(TaskId::C) == std::vector<int>{30, 100, 100, 100, 1});
    CHECK(default_train_config(TaskId::A).learning_rate == doctest::Approx(1e-5));
    CHECK(default_train_config(TaskId::C).learning_rate == doctest::Approx(1e-6));
    CHECK(default_train_config(TaskId::A).beta1 == doctest::Approx(0.9));
    CHECK(default_train_config(TaskId::A).beta2 == doctest::Approx(0.999));
    CHECK(default_train_config(TaskId::A).adam_eps == doctest::Approx(1e-8));
}

}  // TEST_SUITE
