#pragma once

#include "datalog.hpp"
#include "evolve.hpp"

namespace swarmsynth {

// Feed-forward estimator of the global fitness from the local-state
// distribution: ReLU hidden layers, identity output. Hand-rolled so the
// backward pass can be checked against finite differences.
class MicroMacroModel {
public:
    MicroMacroModel() = default;
    MicroMacroModel(std::vector<int> layer_sizes, uint64_t seed);  // scaled-uniform fan-in init

    double forward(const std::vector<double>& input) const;
    int input_size() const { return sizes_.empty() ? 0 : sizes_.front(); }
    const std::vector<int>& layer_sizes() const { return sizes_; }

    // Squared-error gradients for one sample, appended into flat parameter
    // order (w0, b0, w1, b1, ...). Returns the sample loss.
    double accumulate_gradients(const std::vector<double>& input, double target,
                                std::vector<double>& grad) const;
    size_t parameter_count() const;
    double get_parameter(size_t i) const;
    void set_parameter(size_t i, double v);
    void apply_adam_step(const std::vector<double>& grad, std::vector<double>& m,
                         std::vector<double>& v, int t, double lr, double beta1, double beta2,
                         double eps);

    uint64_t weights_checksum() const;
    std::string to_json() const;
    static MicroMacroModel from_json(const std::string& json);

private:
    std::vector<int> sizes_;
    std::vector<std::vector<double>> w_;  // [layer][out * in], row-major
    std::vector<std::vector<double>> b_;  // [layer][out]
};

struct TrainConfig {
    double learning_rate = 1e-5;
    int epochs = 200;
    int batch_size = 256;
    uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int early_stop_plateau = 20;  // epochs without validation improvement; 0 disables

    void validate() const;
};

// Published per-task settings: hidden 3 x 30 at lr 1e-5 for the aggregation
// tasks, 3 x 100 at lr 1e-6 for foraging.
std::vector<int> default_layer_sizes(TaskId task);
TrainConfig default_train_config(TaskId task);

struct TrainHistoryRow {
    int epoch = 0;
    double loss = 0.0;               // mean squared error over the epoch
    std::vector<double> val_r;       // one mean per-run Pearson r per validation set
};

struct TrainResult {
    std::vector<TrainHistoryRow> history;
    int epochs_run = 0;
    bool early_stopped = false;
};

TrainResult train(MicroMacroModel& model, const Dataset& training,
                  const std::vector<const Dataset*>& validations, const TrainConfig& cfg);

// Pearson r of two aligned series; NaN when either has no variance.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

struct CorrelationResult {
    double mean_r = 0.0;  // NaN when no run was usable
    int runs_used = 0;
    int runs_excluded = 0;  // zero-variance runs
};

// Per-run Pearson r over each run's time series, averaged across runs.
CorrelationResult validate_correlation(const MicroMacroModel& model, const Dataset& validation);

// GA search over binary vectors B; candidates scored as forward(B / popcount).
// Ties prefer fewer members, then the lexicographically smallest set. States
// outside `explored` (when given) are dropped from the result afterwards.
DesiredStateSet extract_desired_states(const MicroMacroModel& model, const GAConfig& ga,
                                       const std::vector<int>* explored = nullptr);

// Candidate score used by the extraction (exposed so tests can enumerate).
double desired_set_score(const MicroMacroModel& model, const std::vector<int>& members);

// Max relative error between analytic gradients and central differences.
double gradient_check(const MicroMacroModel& model, const std::vector<double>& input, double target,
                      double h = 1e-5);

void write_train_history_csv(const std::string& path, const std::vector<TrainHistoryRow>& history);

}  // namespace swarmsynth
