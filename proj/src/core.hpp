#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace swarmsynth {

// Thrown when a user-supplied configuration value fails validation.
// Distinct from std::runtime_error so the CLI can map it to exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class TaskId { A, B1, B2, C };

TaskId task_from_string(const std::string& s);
std::string task_to_string(TaskId t);

// Deterministic RNG. All draws go through this wrapper rather than
// std::*_distribution, whose output is implementation-defined; identical
// seeds must give bit-identical streams on any platform.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    double uniform();                     // [0, 1)
    double uniform(double a, double b);   // [a, b)
    int uniform_int(int n);               // {0, ..., n-1}, unbiased
    double normal();                      // standard normal (Marsaglia polar)
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent child seed for a named stream (per run, per robot,
// per GA candidate, ...). splitmix64 of seed xor stream id.
uint64_t mix_seed(uint64_t seed, uint64_t stream);

// FNV-1a, used for artifact checksums and policy hashes.
uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull);
uint64_t fnv1a64_append(uint64_t h, const void* data, size_t len);
std::string hex64(uint64_t v);

using Matrix = std::vector<std::vector<double>>;

Matrix zeros(int rows, int cols);
double row_sum(const Matrix& m, int row);

struct LocalStateSpace {
    TaskId task;
    int size = 0;                       // N
    std::vector<std::string> labels;    // one per state index
};

struct ActionSpace {
    TaskId task;
    int size = 0;                       // M
    std::vector<std::string> labels;
    std::vector<double> values;         // turn rate for B1/B2; 1 = act, 0 = stay for A/C
};

// Published state/action spaces per task: A has N=8 neighbour-count states and
// move/stay; B1/B2 have N=2^4 sector states and 8 turn rates; C has N=30 food
// delta bins and explore/stay. For A and C, action index 0 is the acting one.
LocalStateSpace state_space_for(TaskId t);
ActionSpace action_space_for(TaskId t);

// Row-stochastic N x M table. Invalid tables are rejected at construction.
class Policy {
public:
    Policy(TaskId task, Matrix table);

    TaskId task() const { return task_; }
    int n_states() const { return static_cast<int>(table_.size()); }
    int n_actions() const { return n_actions_; }
    const Matrix& table() const { return table_; }
    const std::vector<double>& row(int state) const;

    std::string to_json() const;
    static Policy from_json(const std::string& json);
    uint64_t hash() const;

    static constexpr double kRowTolerance = 1e-9;

private:
    TaskId task_;
    Matrix table_;
    int n_actions_ = 0;
};

// One row drawn by normalizing M uniform(0,1) samples; full support, seeded.
Policy uniform_random_policy(const LocalStateSpace& space, const ActionSpace& actions, uint64_t seed);

// Draws an index from a probability vector (cumulative scan).
int sample_index(const std::vector<double>& probabilities, Rng& rng);

struct StateDistribution {
    enum class Normalization { fractions, counts };
    std::vector<double> values;
    Normalization normalization = Normalization::fractions;

    void validate() const;  // throws on negative entries or bad fraction sum
};

struct DesiredStateSet {
    enum class Source { extracted, manual };
    std::vector<int> members;  // sorted, unique, in 0..N-1
    Source source = Source::manual;

    bool contains(int s) const;
    std::string to_json(TaskId task) const;
    static DesiredStateSet from_json(const std::string& json);
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be written
// to pre-sized slots so the outcome does not depend on scheduling.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

}  // namespace swarmsynth
