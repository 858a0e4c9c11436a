#include "evolve.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "csv.hpp"
#include "json.hpp"
#include "pagerank.hpp"

namespace swarmsynth {

GenomeSpec GenomeSpec::binary(int length) {
    GenomeSpec s;
    s.kind = Kind::binary;
    s.length = length;
    return s;
}

GenomeSpec GenomeSpec::stochastic(int rows, int cols, double floor_eps) {
    GenomeSpec s;
    s.kind = Kind::stochastic_rows;
    s.rows = rows;
    s.cols = cols;
    s.floor_eps = floor_eps;
    return s;
}

int GenomeSpec::genome_length() const {
    return kind == Kind::binary ? length : rows * cols;
}

void GAConfig::validate() const {
    if (population < 2) throw ConfigError("GA population must be >= 2");
    if (generations < 1) throw ConfigError("GA generations must be >= 1");
    if (evaluations_per_candidate < 1) throw ConfigError("GA evaluations per candidate must be >= 1");
    if (crossover_rate < 0.0 || crossover_rate > 1.0) throw ConfigError("GA crossover rate must be in [0,1]");
    if (mutation_rate > 1.0) throw ConfigError("GA mutation rate must be <= 1");
    if (elitism < 0 || elitism >= population) throw ConfigError("GA elitism must be in [0, population)");
    if (tournament_k < 1) throw ConfigError("GA tournament size must be >= 1");
}

void project_stochastic_row(std::vector<double>& row, double floor_eps) {
    const int m = static_cast<int>(row.size());
    if (floor_eps * m > 1.0 + 1e-12)
        throw ConfigError("probability floor too large for row width");
    double sum = 0.0;
    for (double& v : row) {
        if (v < 0.0) v = 0.0;
        sum += v;
    }
    if (sum <= 0.0) {
        for (double& v : row) v = 1.0 / m;
        return;
    }
    for (double& v : row) v /= sum;
    if (floor_eps <= 0.0) return;
    // Raise sub-floor entries to the floor and rescale the rest; repeat until
    // stable (at most m passes).
    for (int pass = 0; pass < m; ++pass) {
        double deficit = 0.0;
        double free_mass = 0.0;
        int floored = 0;
        for (double v : row) {
            if (v <= floor_eps + 1e-15) {
                deficit += floor_eps;
                ++floored;
            } else {
                free_mass += v;
            }
        }
        if (floored == 0 || floored == m) break;
        bool changed = false;
        double scale = (1.0 - deficit) / free_mass;
        for (double& v : row) {
            if (v <= floor_eps + 1e-15) {
                if (v != floor_eps) changed = true;
                v = floor_eps;
            } else {
                v *= scale;
                if (v < floor_eps - 1e-15) changed = true;
            }
        }
        if (!changed) break;
    }
    if (std::all_of(row.begin(), row.end(),
                    [&](double v) { return v <= floor_eps + 1e-15; })) {
        for (double& v : row) v = 1.0 / m;
    }
}

Genome random_genome(const GenomeSpec& spec, Rng& rng) {
    Genome g(static_cast<size_t>(spec.genome_length()));
    if (spec.kind == GenomeSpec::Kind::binary) {
        for (double& v : g) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
        return g;
    }
    for (int r = 0; r < spec.rows; ++r) {
        std::vector<double> row(static_cast<size_t>(spec.cols));
        for (double& v : row) v = rng.uniform();
        project_stochastic_row(row, spec.floor_eps);
        std::copy(row.begin(), row.end(), g.begin() + static_cast<long>(r) * spec.cols);
    }
    return g;
}

void mutate_genome(const GenomeSpec& spec, Genome& g, double rate, double sigma, Rng& rng) {
    if (spec.kind == GenomeSpec::Kind::binary) {
        for (double& v : g)
            if (rng.uniform() < rate) v = 1.0 - v;
        return;
    }
    for (int r = 0; r < spec.rows; ++r) {
        bool touched = false;
        auto begin = g.begin() + static_cast<long>(r) * spec.cols;
        for (int c = 0; c < spec.cols; ++c) {
            if (rng.uniform() < rate) {
                begin[c] += sigma * rng.normal();
                touched = true;
            }
        }
        if (touched) {
            std::vector<double> row(begin, begin + spec.cols);
            project_stochastic_row(row, spec.floor_eps);
            std::copy(row.begin(), row.end(), begin);
        }
    }
}

namespace {

void uniform_crossover(const GenomeSpec& spec, Genome& a, Genome& b, Rng& rng) {
    if (spec.kind == GenomeSpec::Kind::binary) {
        for (size_t i = 0; i < a.size(); ++i)
            if (rng.uniform() < 0.5) std::swap(a[i], b[i]);
        return;
    }
    // Swap whole rows so both children stay row-stochastic without rework.
    for (int r = 0; r < spec.rows; ++r) {
        if (rng.uniform() >= 0.5) continue;
        auto ia = a.begin() + static_cast<long>(r) * spec.cols;
        auto ib = b.begin() + static_cast<long>(r) * spec.cols;
        std::swap_ranges(ia, ia + spec.cols, ib);
    }
}

std::string genome_json(const Genome& g) {
    nlohmann::json j = g;
    return j.dump();
}

struct Ranked {
    double fitness;
    int index;
};

}  // namespace

EvolveResult evolve(const GenomeSpec& spec, const FitnessFn& fitness, const GAConfig& cfg,
                    const PreferenceFn& prefer, const EvolveHooks& hooks) {
    cfg.validate();
    if (spec.genome_length() < 1) throw ConfigError("genome length must be >= 1");
    const double mutation_rate =
        cfg.mutation_rate >= 0.0 ? cfg.mutation_rate : 1.0 / spec.genome_length();

    Rng rng(mix_seed(cfg.seed, 0x6e6f6c7576ull));
    std::vector<Genome> pop;
    pop.reserve(static_cast<size_t>(cfg.population));
    for (const auto& g : cfg.initial) {
        if (static_cast<int>(pop.size()) == cfg.population) break;
        if (static_cast<int>(g.size()) != spec.genome_length())
            throw ConfigError("seed genome has wrong length");
        pop.push_back(g);
    }
    while (static_cast<int>(pop.size()) < cfg.population) pop.push_back(random_genome(spec, rng));

    // `prefer` breaks exact fitness ties; used by the desired-state extractor.
    auto better = [&](double fa, const Genome& ga, double fb, const Genome& gb) {
        if (fa != fb) return fa > fb;
        return prefer ? prefer(ga, gb) : false;
    };

    EvolveResult result;
    bool have_best = false;

    std::vector<double> fit(static_cast<size_t>(cfg.population), 0.0);
    for (int gen = 0; gen < cfg.generations; ++gen) {
        // Seeds are drawn up front so jobs > 1 cannot change the outcome.
        std::vector<std::vector<uint64_t>> eval_seeds(static_cast<size_t>(cfg.population));
        for (int i = 0; i < cfg.population; ++i)
            for (int e = 0; e < cfg.evaluations_per_candidate; ++e)
                eval_seeds[static_cast<size_t>(i)].push_back(rng.next_u64());

        std::vector<std::string> failure(static_cast<size_t>(cfg.population));
        parallel_for(cfg.population, cfg.jobs, [&](int i) {
            double acc = 0.0;
            for (int e = 0; e < cfg.evaluations_per_candidate; ++e) {
                EvalContext ctx{gen, i, e, eval_seeds[static_cast<size_t>(i)][static_cast<size_t>(e)]};
                try {
                    acc += fitness(pop[static_cast<size_t>(i)], ctx);
                } catch (const std::exception& ex) {
                    failure[static_cast<size_t>(i)] = ex.what();
                    return;
                }
            }
            fit[static_cast<size_t>(i)] = acc / cfg.evaluations_per_candidate;
        });
        for (int i = 0; i < cfg.population; ++i) {
            if (!failure[static_cast<size_t>(i)].empty())
                throw std::runtime_error("fitness evaluation failed: " + failure[static_cast<size_t>(i)] +
                                         "; genome " + genome_json(pop[static_cast<size_t>(i)]));
        }

        double best = fit[0], mean = 0.0;
        int best_idx = 0;
        for (int i = 0; i < cfg.population; ++i) {
            mean += fit[static_cast<size_t>(i)];
            if (better(fit[static_cast<size_t>(i)], pop[static_cast<size_t>(i)], best,
                       pop[static_cast<size_t>(best_idx)]) ||
                i == 0) {
                best = fit[static_cast<size_t>(i)];
                best_idx = i;
            }
        }
        mean /= cfg.population;
        double var = 0.0;
        for (double f : fit) var += (f - mean) * (f - mean);
        double stddev = std::sqrt(var / cfg.population);

        if (!have_best || better(best, pop[static_cast<size_t>(best_idx)], result.best_fitness, result.best)) {
            result.best = pop[static_cast<size_t>(best_idx)];
            result.best_fitness = best;
            have_best = true;
        }
        // History reports best-so-far, which elitism makes non-decreasing.
        result.history.push_back({gen, result.best_fitness, mean, stddev});

        if (hooks.after_evaluation) hooks.after_evaluation(gen, pop, fit);

        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_dir.empty() &&
            (gen % cfg.checkpoint_every) == 0) {
            std::filesystem::create_directories(cfg.checkpoint_dir);
            nlohmann::json j;
            j["generation"] = gen;
            j["population"] = pop;
            j["fitness"] = fit;
            std::ofstream out(cfg.checkpoint_dir + "/population_" + std::to_string(gen) + ".json");
            out << j.dump();
        }

        if (gen + 1 == cfg.generations) break;

        // Rank for elitism (stable: ties keep lower index).
        std::vector<int> order(static_cast<size_t>(cfg.population));
        for (int i = 0; i < cfg.population; ++i) order[static_cast<size_t>(i)] = i;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return better(fit[static_cast<size_t>(a)], pop[static_cast<size_t>(a)],
                          fit[static_cast<size_t>(b)], pop[static_cast<size_t>(b)]);
        });

        std::vector<Genome> next;
        next.reserve(static_cast<size_t>(cfg.population));
        for (int e = 0; e < cfg.elitism; ++e) next.push_back(pop[static_cast<size_t>(order[static_cast<size_t>(e)])]);

        auto tournament = [&]() -> const Genome& {
            int winner = rng.uniform_int(cfg.population);
            for (int t = 1; t < cfg.tournament_k; ++t) {
                int challenger = rng.uniform_int(cfg.population);
                if (better(fit[static_cast<size_t>(challenger)], pop[static_cast<size_t>(challenger)],
                           fit[static_cast<size_t>(winner)], pop[static_cast<size_t>(winner)]))
                    winner = challenger;
            }
            return pop[static_cast<size_t>(winner)];
        };

        while (static_cast<int>(next.size()) < cfg.population) {
            Genome a = tournament();
            Genome b = tournament();
            if (rng.uniform() < cfg.crossover_rate) uniform_crossover(spec, a, b, rng);
            mutate_genome(spec, a, mutation_rate, cfg.mutation_sigma, rng);
            next.push_back(std::move(a));
            if (static_cast<int>(next.size()) < cfg.population) {
                mutate_genome(spec, b, mutation_rate, cfg.mutation_sigma, rng);
                next.push_back(std::move(b));
            }
        }

        if (hooks.before_next_evaluation) hooks.before_next_evaluation(gen, next);
        pop = std::move(next);
    }
    return result;
}

Policy genome_to_policy(TaskId task, const GenomeSpec& spec, const Genome& g) {
    Matrix table = zeros(spec.rows, spec.cols);
    for (int r = 0; r < spec.rows; ++r) {
        std::vector<double> row(g.begin() + static_cast<long>(r) * spec.cols,
                                g.begin() + static_cast<long>(r + 1) * spec.cols);
        project_stochastic_row(row, spec.floor_eps);
        table[static_cast<size_t>(r)] = std::move(row);
    }
    return Policy(task, std::move(table));
}

Genome policy_to_genome(const Policy& p) {
    Genome g;
    g.reserve(static_cast<size_t>(p.n_states() * p.n_actions()));
    for (const auto& row : p.table()) g.insert(g.end(), row.begin(), row.end());
    return g;
}

PolicyOptimization optimize_policy_pr(const TransitionModel& model, TaskId task,
                                      const DesiredStateSet& desired, const GAConfig& cfg,
                                      double epsilon, double alpha_prior) {
    if (desired.members.empty())
        throw ConfigError("policy optimization needs a non-empty desired state set");
    const int n = model.n_states();
    const int m = model.n_actions();
    if (epsilon < 0.0 || epsilon >= 1.0 / m)
        throw ConfigError("policy floor epsilon must be in [0, 1/M)");

    PolicyOptimization out{Policy(task, zeros(n, m)), {}, false, 0.0};
    if (model.empty()) {
        std::cerr << "warning: transition model has no events; returning uniform policy\n";
        Matrix uniform = zeros(n, m);
        for (auto& row : uniform) row.assign(static_cast<size_t>(m), 1.0 / m);
        out.policy = Policy(task, std::move(uniform));
        out.degenerate_model = true;
        PageRankVector pr = pagerank(compose_G(model, out.policy, alpha_prior));
        out.fitness = fitness_pr(pr, desired);
        return out;
    }

    GenomeSpec spec = GenomeSpec::stochastic(n, m, epsilon);
    FitnessFn fit = [&](const Genome& g, const EvalContext&) {
        Policy p = genome_to_policy(task, spec, g);
        PageRankVector pr = pagerank(compose_G(model, p, alpha_prior));
        return fitness_pr(pr, desired);
    };
    GAConfig ga = cfg;
    ga.evaluations_per_candidate = 1;  // deterministic fitness
    EvolveResult res = evolve(spec, fit, ga);
    out.policy = genome_to_policy(task, spec, res.best);
    out.history = res.history;
    out.fitness = res.best_fitness;
    return out;
}

void write_history_csv(const std::string& path, const std::vector<GenerationStats>& history) {
    CsvWriter csv(path, {"generation", "best", "mean", "std"});
    for (const auto& h : history) {
        csv.field(h.generation).field(h.best).field(h.mean).field(h.stddev).endrow();
    }
}

}  // namespace swarmsynth
