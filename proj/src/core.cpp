#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <thread>

#include "json.hpp"

namespace swarmsynth {

TaskId task_from_string(const std::string& s) {
    if (s == "A") return TaskId::A;
    if (s == "B1") return TaskId::B1;
    if (s == "B2") return TaskId::B2;
    if (s == "C") return TaskId::C;
    throw ConfigError("unknown task '" + s + "' (expected A, B1, B2 or C)");
}

std::string task_to_string(TaskId t) {
    switch (t) {
        case TaskId::A: return "A";
        case TaskId::B1: return "B1";
        case TaskId::B2: return "B2";
        case TaskId::C: return "C";
    }
    return "?";
}

namespace {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) {
    // xoshiro256** seeded through splitmix64, per the reference recipe.
    uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
}

uint64_t Rng::next_u64() {
    uint64_t result = rotl(state_[1] * 5, 7) * 9;
    uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) { return a + (b - a) * uniform(); }

int Rng::uniform_int(int n) {
    // Rejection sampling over the top multiple of n.
    uint64_t un = static_cast<uint64_t>(n);
    uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return static_cast<int>(v % un);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = uniform(-1.0, 1.0);
        v = uniform(-1.0, 1.0);
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    uint64_t x = seed ^ (0x9e3779b97f4a7c15ull + stream * 0xbf58476d1ce4e5b9ull);
    return splitmix64(x);
}

uint64_t fnv1a64(const void* data, size_t len, uint64_t h) {
    return fnv1a64_append(h, data, len);
}

uint64_t fnv1a64_append(uint64_t h, const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

Matrix zeros(int rows, int cols) {
    return Matrix(static_cast<size_t>(rows), std::vector<double>(static_cast<size_t>(cols), 0.0));
}

double row_sum(const Matrix& m, int row) {
    double s = 0.0;
    for (double v : m[static_cast<size_t>(row)]) s += v;
    return s;
}

LocalStateSpace state_space_for(TaskId t) {
    LocalStateSpace space;
    space.task = t;
    switch (t) {
        case TaskId::A: {
            space.size = 8;  // neighbour counts 0..m_max, m_max = 7
            for (int m = 0; m < space.size; ++m)
                space.labels.push_back(std::to_string(m) + " neighbors");
            break;
        }
        case TaskId::B1:
        case TaskId::B2: {
            space.size = 16;  // bitmask over q = 4 sectors
            for (int s = 0; s < space.size; ++s) {
                std::string label = "sectors ";
                for (int j = 0; j < 4; ++j) label += ((s >> j) & 1) ? '1' : '0';
                space.labels.push_back(label);
            }
            break;
        }
        case TaskId::C: {
            space.size = 30;  // food delta bins over [-f_max, f_max], f_max = 5
            const double f_max = 5.0;
            for (int k = 0; k < space.size; ++k) {
                double lo = -f_max + 2.0 * f_max * k / space.size;
                double hi = -f_max + 2.0 * f_max * (k + 1) / space.size;
                char buf[64];
                std::snprintf(buf, sizeof(buf), "fg [%.2f, %.2f)", lo, hi);
                space.labels.push_back(buf);
            }
            break;
        }
    }
    return space;
}

ActionSpace action_space_for(TaskId t) {
    ActionSpace a;
    a.task = t;
    switch (t) {
        case TaskId::A:
            a.size = 2;
            a.labels = {"move", "stay"};
            a.values = {1.0, 0.0};
            break;
        case TaskId::B1:
        case TaskId::B2:
            a.labels = {"-1.0", "-0.7", "-0.3", "-0.1", "0.1", "0.3", "0.7", "1.0"};
            a.values = {-1.0, -0.7, -0.3, -0.1, 0.1, 0.3, 0.7, 1.0};
            a.size = static_cast<int>(a.values.size());
            break;
        case TaskId::C:
            a.size = 2;
            a.labels = {"explore", "stay"};
            a.values = {1.0, 0.0};
            break;
    }
    return a;
}

Policy::Policy(TaskId task, Matrix table) : task_(task), table_(std::move(table)) {
    if (table_.empty()) throw ConfigError("policy table must have at least one row");
    n_actions_ = static_cast<int>(table_[0].size());
    if (n_actions_ < 1) throw ConfigError("policy table must have at least one column");
    for (size_t i = 0; i < table_.size(); ++i) {
        const auto& row = table_[i];
        if (static_cast<int>(row.size()) != n_actions_)
            throw ConfigError("policy table is ragged at row " + std::to_string(i));
        double sum = 0.0;
        for (double p : row) {
            if (!(p >= 0.0 && p <= 1.0 + kRowTolerance))
                throw ConfigError("policy entry outside [0,1] at row " + std::to_string(i));
            sum += p;
        }
        if (std::abs(sum - 1.0) > kRowTolerance)
            throw ConfigError("policy row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
}

const std::vector<double>& Policy::row(int state) const {
    if (state < 0 || state >= n_states())
        throw std::out_of_range("policy row " + std::to_string(state) + " out of range");
    return table_[static_cast<size_t>(state)];
}

std::string Policy::to_json() const {
    nlohmann::json j;
    j["task"] = task_to_string(task_);
    j["n_states"] = n_states();
    j["n_actions"] = n_actions();
    j["table"] = table_;
    return j.dump();
}

Policy Policy::from_json(const std::string& json) {
    nlohmann::json j = nlohmann::json::parse(json);
    TaskId task = task_from_string(j.at("task").get<std::string>());
    Matrix table = j.at("table").get<Matrix>();
    Policy p(task, std::move(table));
    if (p.n_states() != j.at("n_states").get<int>() || p.n_actions() != j.at("n_actions").get<int>())
        throw ConfigError("policy JSON dimensions do not match its table");
    return p;
}

uint64_t Policy::hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    int t = static_cast<int>(task_);
    h = fnv1a64_append(h, &t, sizeof(t));
    for (const auto& row : table_)
        h = fnv1a64_append(h, row.data(), row.size() * sizeof(double));
    return h;
}

Policy uniform_random_policy(const LocalStateSpace& space, const ActionSpace& actions, uint64_t seed) {
    Rng rng(seed);
    Matrix table = zeros(space.size, actions.size);
    for (auto& row : table) {
        double sum = 0.0;
        for (auto& p : row) {
            p = rng.uniform();
            sum += p;
        }
        if (sum <= 0.0) {  // all-zero draw is essentially impossible; keep rows valid anyway
            row.assign(row.size(), 1.0 / static_cast<double>(row.size()));
            continue;
        }
        for (auto& p : row) p /= sum;
    }
    return Policy(space.task, std::move(table));
}

int sample_index(const std::vector<double>& probabilities, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    for (size_t i = 0; i < probabilities.size(); ++i) {
        acc += probabilities[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probabilities.size()) - 1;  // guard against rounding
}

void StateDistribution::validate() const {
    if (values.empty()) throw ConfigError("state distribution is empty");
    double sum = 0.0;
    for (double v : values) {
        if (v < 0.0) throw ConfigError("state distribution has a negative entry");
        sum += v;
    }
    if (normalization == Normalization::fractions && std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("state distribution fractions sum to " + std::to_string(sum));
}

bool DesiredStateSet::contains(int s) const {
    return std::binary_search(members.begin(), members.end(), s);
}

std::string DesiredStateSet::to_json(TaskId task) const {
    nlohmann::json j;
    j["task"] = task_to_string(task);
    j["desired"] = members;
    return j.dump();
}

DesiredStateSet DesiredStateSet::from_json(const std::string& json) {
    nlohmann::json j = nlohmann::json::parse(json);
    DesiredStateSet s;
    s.members = j.at("desired").get<std::vector<int>>();
    std::sort(s.members.begin(), s.members.end());
    s.members.erase(std::unique(s.members.begin(), s.members.end()), s.members.end());
    if (!s.members.empty() && s.members.front() < 0)
        throw ConfigError("desired state set contains a negative index");
    return s;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w]() {
            try {
                for (int i = w; i < n; i += jobs) fn(i);
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace swarmsynth
