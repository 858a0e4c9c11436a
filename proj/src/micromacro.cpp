#include "micromacro.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>

#include "csv.hpp"
#include "json.hpp"

namespace swarmsynth {

MicroMacroModel::MicroMacroModel(std::vector<int> layer_sizes, uint64_t seed)
    : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw ConfigError("network needs at least input and output layers");
    for (int s : sizes_)
        if (s < 1) throw ConfigError("network layer sizes must be positive");
    if (sizes_.back() != 1) throw ConfigError("network output layer must have one unit");
    Rng rng(mix_seed(seed, 0x6d6c70ull));
    for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
        int fan_in = sizes_[l], fan_out = sizes_[l + 1];
        double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::vector<double> w(static_cast<size_t>(fan_in) * fan_out);
        for (double& v : w) v = rng.uniform(-scale, scale);
        w_.push_back(std::move(w));
        b_.push_back(std::vector<double>(static_cast<size_t>(fan_out), 0.0));
    }
}

double MicroMacroModel::forward(const std::vector<double>& input) const {
    if (static_cast<int>(input.size()) != input_size())
        throw ConfigError("network input length does not match the input layer");
    std::vector<double> act = input;
    for (size_t l = 0; l < w_.size(); ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        std::vector<double> next(static_cast<size_t>(out));
        for (int o = 0; o < out; ++o) {
            double z = b_[l][static_cast<size_t>(o)];
            const double* row = &w_[l][static_cast<size_t>(o) * in];
            for (int i = 0; i < in; ++i) z += row[i] * act[static_cast<size_t>(i)];
            next[static_cast<size_t>(o)] = (l + 1 < w_.size()) ? std::max(0.0, z) : z;
        }
        act = std::move(next);
    }
    return act[0];
}

double MicroMacroModel::accumulate_gradients(const std::vector<double>& input, double target,
                                             std::vector<double>& grad) const {
    if (grad.size() != parameter_count()) grad.assign(parameter_count(), 0.0);
    // Forward with cached activations.
    std::vector<std::vector<double>> acts;  // post-activation per layer, acts[0] = input
    acts.push_back(input);
    for (size_t l = 0; l < w_.size(); ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        std::vector<double> next(static_cast<size_t>(out));
        for (int o = 0; o < out; ++o) {
            double z = b_[l][static_cast<size_t>(o)];
            const double* row = &w_[l][static_cast<size_t>(o) * in];
            for (int i = 0; i < in; ++i) z += row[i] * acts[l][static_cast<size_t>(i)];
            next[static_cast<size_t>(o)] = (l + 1 < w_.size()) ? std::max(0.0, z) : z;
        }
        acts.push_back(std::move(next));
    }
    const double prediction = acts.back()[0];
    const double err = prediction - target;
    const double loss = err * err;

    // Backward: d(loss)/d(prediction) = 2 err; ReLU gate uses the cached
    // post-activation (> 0 means the unit was live).
    std::vector<double> delta = {2.0 * err};
    size_t offset = parameter_count();
    for (size_t li = w_.size(); li-- > 0;) {
        const int in = sizes_[li], out = sizes_[li + 1];
        offset -= static_cast<size_t>(out);
        double* gb = grad.data() + offset;
        offset -= static_cast<size_t>(in) * out;
        double* gw = grad.data() + offset;
        std::vector<double> prev_delta(static_cast<size_t>(in), 0.0);
        for (int o = 0; o < out; ++o) {
            double d = delta[static_cast<size_t>(o)];
            if (d == 0.0) continue;
            gb[o] += d;
            const double* row = &w_[li][static_cast<size_t>(o) * in];
            double* grow = gw + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i) {
                grow[i] += d * acts[li][static_cast<size_t>(i)];
                prev_delta[static_cast<size_t>(i)] += d * row[i];
            }
        }
        if (li > 0) {
            for (int i = 0; i < in; ++i)
                if (acts[li][static_cast<size_t>(i)] <= 0.0) prev_delta[static_cast<size_t>(i)] = 0.0;
            delta = std::move(prev_delta);
        }
    }
    return loss;
}

size_t MicroMacroModel::parameter_count() const {
    size_t n = 0;
    for (size_t l = 0; l < w_.size(); ++l) n += w_[l].size() + b_[l].size();
    return n;
}

double MicroMacroModel::get_parameter(size_t i) const {
    for (size_t l = 0; l < w_.size(); ++l) {
        if (i < w_[l].size()) return w_[l][i];
        i -= w_[l].size();
        if (i < b_[l].size()) return b_[l][i];
        i -= b_[l].size();
    }
    throw std::out_of_range("parameter index");
}

void MicroMacroModel::set_parameter(size_t i, double v) {
    for (size_t l = 0; l < w_.size(); ++l) {
        if (i < w_[l].size()) {
            w_[l][i] = v;
            return;
        }
        i -= w_[l].size();
        if (i < b_[l].size()) {
            b_[l][i] = v;
            return;
        }
        i -= b_[l].size();
    }
    throw std::out_of_range("parameter index");
}

void MicroMacroModel::apply_adam_step(const std::vector<double>& grad, std::vector<double>& m,
                                      std::vector<double>& v, int t, double lr, double beta1,
                                      double beta2, double eps) {
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    size_t i = 0;
    for (size_t l = 0; l < w_.size(); ++l) {
        auto update = [&](double& param) {
            double g = grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            param -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
            ++i;
        };
        for (double& p : w_[l]) update(p);
        for (double& p : b_[l]) update(p);
    }
}

uint64_t MicroMacroModel::weights_checksum() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t l = 0; l < w_.size(); ++l) {
        h = fnv1a64_append(h, w_[l].data(), w_[l].size() * sizeof(double));
        h = fnv1a64_append(h, b_[l].data(), b_[l].size() * sizeof(double));
    }
    return h;
}

std::string MicroMacroModel::to_json() const {
    nlohmann::json j;
    j["layer_sizes"] = sizes_;
    j["weights"] = w_;
    j["biases"] = b_;
    return j.dump();
}

MicroMacroModel MicroMacroModel::from_json(const std::string& json) {
    nlohmann::json j = nlohmann::json::parse(json);
    MicroMacroModel m;
    m.sizes_ = j.at("layer_sizes").get<std::vector<int>>();
    m.w_ = j.at("weights").get<std::vector<std::vector<double>>>();
    m.b_ = j.at("biases").get<std::vector<std::vector<double>>>();
    if (m.w_.size() + 1 != m.sizes_.size() || m.b_.size() != m.w_.size())
        throw ConfigError("model JSON layer shapes do not chain");
    for (size_t l = 0; l + 1 < m.sizes_.size(); ++l) {
        size_t expect = static_cast<size_t>(m.sizes_[l]) * m.sizes_[l + 1];
        if (m.w_[l].size() != expect || m.b_[l].size() != static_cast<size_t>(m.sizes_[l + 1]))
            throw ConfigError("model JSON weight array has wrong length");
    }
    return m;
}

void TrainConfig::validate() const {
    if (learning_rate <= 0) throw ConfigError("learning rate must be positive");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
}

std::vector<int> default_layer_sizes(TaskId task) {
    int n = state_space_for(task).size;
    int hidden = task == TaskId::C ? 100 : 30;
    return {n, hidden, hidden, hidden, 1};
}

TrainConfig default_train_config(TaskId task) {
    TrainConfig c;
    c.learning_rate = task == TaskId::C ? 1e-6 : 1e-5;
    return c;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double n = static_cast<double>(a.size());
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double cov = 0, va = 0, vb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double da = a[i] - ma, db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va <= 1e-30 || vb <= 1e-30) return std::numeric_limits<double>::quiet_NaN();
    return cov / std::sqrt(va * vb);
}

CorrelationResult validate_correlation(const MicroMacroModel& model, const Dataset& validation) {
    CorrelationResult out;
    double sum_r = 0.0;
    size_t i = 0;
    while (i < validation.pairs.size()) {
        int run = validation.pairs[i].run_id;
        std::vector<double> truth, estimate;
        while (i < validation.pairs.size() && validation.pairs[i].run_id == run) {
            truth.push_back(validation.pairs[i].target);
            estimate.push_back(model.forward(validation.pairs[i].p));
            ++i;
        }
        double r = pearson(estimate, truth);
        if (std::isnan(r)) {
            out.runs_excluded++;
        } else {
            sum_r += r;
            out.runs_used++;
        }
    }
    out.mean_r = out.runs_used > 0 ? sum_r / out.runs_used
                                   : std::numeric_limits<double>::quiet_NaN();
    return out;
}

TrainResult train(MicroMacroModel& model, const Dataset& training,
                  const std::vector<const Dataset*>& validations, const TrainConfig& cfg) {
    cfg.validate();
    if (training.pairs.empty()) throw ConfigError("training dataset is empty");
    for (const auto& p : training.pairs)
        if (!std::isfinite(p.target)) throw ConfigError("training target is not finite");

    TrainResult result;
    const size_t n_params = model.parameter_count();
    std::vector<double> grad(n_params, 0.0), m(n_params, 0.0), v(n_params, 0.0);
    std::vector<size_t> index(training.pairs.size());
    std::iota(index.begin(), index.end(), 0);
    Rng rng(mix_seed(cfg.seed, 0x747261696eull));

    double best_val = -std::numeric_limits<double>::infinity();
    int since_best = 0;
    int adam_t = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(index);
        double epoch_loss = 0.0;
        size_t pos = 0;
        while (pos < index.size()) {
            size_t batch = std::min(static_cast<size_t>(cfg.batch_size), index.size() - pos);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (size_t k = 0; k < batch; ++k) {
                const auto& pair = training.pairs[index[pos + k]];
                batch_loss += model.accumulate_gradients(pair.p, pair.target, grad);
            }
            for (double& g : grad) g /= static_cast<double>(batch);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training aborted: non-finite loss at epoch " +
                                         std::to_string(epoch));
            model.apply_adam_step(grad, m, v, ++adam_t, cfg.learning_rate, cfg.beta1, cfg.beta2,
                                  cfg.adam_eps);
            epoch_loss += batch_loss;
            pos += batch;
        }
        epoch_loss /= static_cast<double>(index.size());

        TrainHistoryRow row;
        row.epoch = epoch;
        row.loss = epoch_loss;
        double val_mean = 0.0;
        int val_count = 0;
        for (const Dataset* val : validations) {
            CorrelationResult r = validate_correlation(model, *val);
            row.val_r.push_back(r.mean_r);
            if (!std::isnan(r.mean_r)) {
                val_mean += r.mean_r;
                ++val_count;
            }
        }
        result.history.push_back(row);
        result.epochs_run = epoch + 1;

        if (!validations.empty() && cfg.early_stop_plateau > 0) {
            double score = val_count > 0 ? val_mean / val_count
                                         : -std::numeric_limits<double>::infinity();
            if (score > best_val + 1e-6) {
                best_val = score;
                since_best = 0;
            } else if (++since_best >= cfg.early_stop_plateau) {
                result.early_stopped = true;
                break;
            }
        }
    }
    return result;
}

double desired_set_score(const MicroMacroModel& model, const std::vector<int>& members) {
    if (members.empty()) return -std::numeric_limits<double>::infinity();
    std::vector<double> input(static_cast<size_t>(model.input_size()), 0.0);
    for (int s : members) input[static_cast<size_t>(s)] = 1.0 / static_cast<double>(members.size());
    return model.forward(input);
}

namespace {

std::vector<int> genome_members(const Genome& g) {
    std::vector<int> members;
    for (size_t i = 0; i < g.size(); ++i)
        if (g[i] >= 0.5) members.push_back(static_cast<int>(i));
    return members;
}

}  // namespace

DesiredStateSet extract_desired_states(const MicroMacroModel& model, const GAConfig& ga,
                                       const std::vector<int>* explored) {
    const int n = model.input_size();
    GenomeSpec spec = GenomeSpec::binary(n);
    FitnessFn fitness = [&](const Genome& g, const EvalContext&) {
        return desired_set_score(model, genome_members(g));
    };
    PreferenceFn prefer = [](const Genome& a, const Genome& b) {
        auto ma = genome_members(a), mb = genome_members(b);
        if (ma.size() != mb.size()) return ma.size() < mb.size();
        return ma < mb;
    };
    GAConfig cfg = ga;
    cfg.evaluations_per_candidate = 1;
    // Seed every singleton so the tie-break target is present from the start.
    for (int s = 0; s < n; ++s) {
        Genome g(static_cast<size_t>(n), 0.0);
        g[static_cast<size_t>(s)] = 1.0;
        cfg.initial.push_back(std::move(g));
    }
    cfg.initial.push_back(Genome(static_cast<size_t>(n), 1.0));

    EvolveResult res = evolve(spec, fitness, cfg, prefer);
    DesiredStateSet out;
    out.members = genome_members(res.best);
    out.source = DesiredStateSet::Source::extracted;
    if (explored) {
        std::vector<int> kept;
        for (int s : out.members)
            if (std::binary_search(explored->begin(), explored->end(), s)) kept.push_back(s);
        out.members = kept;
    }
    return out;
}

double gradient_check(const MicroMacroModel& model, const std::vector<double>& input, double target,
                      double h) {
    MicroMacroModel probe = model;
    std::vector<double> analytic;
    probe.accumulate_gradients(input, target, analytic);
    double max_rel = 0.0;
    auto loss_at = [&](size_t i, double value) {
        double saved = probe.get_parameter(i);
        probe.set_parameter(i, value);
        double pred = probe.forward(input);
        probe.set_parameter(i, saved);
        double err = pred - target;
        return err * err;
    };
    for (size_t i = 0; i < probe.parameter_count(); ++i) {
        double p = probe.get_parameter(i);
        double numeric = (loss_at(i, p + h) - loss_at(i, p - h)) / (2.0 * h);
        double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
    }
    return max_rel;
}

void write_train_history_csv(const std::string& path, const std::vector<TrainHistoryRow>& history) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    CsvWriter csv(path, {"epoch", "vs1_r", "vs2_r", "vs3_r", "loss"});
    for (const auto& row : history) {
        csv.field(row.epoch);
        for (size_t i = 0; i < 3; ++i)
            csv.field(i < row.val_r.size() ? row.val_r[i] : std::numeric_limits<double>::quiet_NaN());
        csv.field(row.loss).endrow();
    }
}

}  // namespace swarmsynth
