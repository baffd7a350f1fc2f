#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "skyfuse/model.hpp"
#include "skyfuse/pipeline.hpp"

namespace skyfuse {

struct OptimizerConfig {
    double learning_rate = 1e-4;
    double weight_decay = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (learning_rate <= 0.0)
            throw ValueError("optimizer: learning rate must be positive");
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
            throw ValueError("optimizer: betas must lie in [0, 1)");
        if (weight_decay < 0.0)
            throw ValueError("optimizer: weight decay must be non-negative");
    }
};

template <typename S>
struct AdamState {
    std::vector<S> m, v;
};

/// One decoupled AdamW update with bias correction:
///   theta -= lr * mhat / (sqrt(vhat) + eps) + lr * weight_decay * theta
/// where both terms read the pre-update theta. `decay` is off for biases
/// and layer-norm parameters.
template <typename S>
void adamw_step(Tensor<S>& theta, std::span<const S> grad, AdamState<S>& state,
                const OptimizerConfig& cfg, std::size_t t, double lr,
                bool decay = true) {
    if (t < 1) throw ValueError("adamw: step index starts at 1");
    if (grad.size() != theta.size())
        throw ShapeError("adamw: gradient length " + std::to_string(grad.size()) +
                         " does not match parameter length " +
                         std::to_string(theta.size()));
    if (state.m.size() != theta.size()) state.m.assign(theta.size(), S(0));
    if (state.v.size() != theta.size()) state.v.assign(theta.size(), S(0));

    const S b1 = static_cast<S>(cfg.beta1);
    const S b2 = static_cast<S>(cfg.beta2);
    const S corr1 = static_cast<S>(1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
    const S corr2 = static_cast<S>(1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
    const S step = static_cast<S>(lr);
    const S wd = decay ? static_cast<S>(cfg.weight_decay) : S(0);
    const S eps = static_cast<S>(cfg.eps);

    for (std::size_t i = 0; i < theta.size(); ++i) {
        const S g = grad[i];
        state.m[i] = b1 * state.m[i] + (S(1) - b1) * g;
        state.v[i] = b2 * state.v[i] + (S(1) - b2) * g * g;
        const S mhat = state.m[i] / corr1;
        const S vhat = state.v[i] / corr2;
        theta[i] -= step * (mhat / (std::sqrt(vhat) + eps)) + step * wd * theta[i];
    }
}

/// Reduce-on-plateau over a maximized metric: after `patience` epochs
/// without strict improvement the learning rate is multiplied by `factor`.
struct SchedulerState {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t since_improvement = 0;
    std::size_t patience = 5;
    double factor = 0.5;
    double lr = 1e-4;
};

void plateau_step(SchedulerState& state, double val_accuracy);

/// Early stopping on validation accuracy with a best-parameter snapshot.
struct EarlyStopState {
    double best_accuracy = -std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t since_improvement = 0;
    std::size_t patience = 20;
    std::optional<ParameterSet<float>> snapshot;
};

/// Returns true when training should stop. Snapshots the parameters on
/// every strict improvement; evaluation uses the snapshot, not the final
/// weights.
bool early_stop_step(EarlyStopState& state, double val_accuracy,
                     ParameterSet<float>& params, std::size_t epoch);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// K x K counts; rows are the true class, columns the predicted one.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes)
        : classes_(classes), counts_(classes * classes, 0) {}

    void add(int truth, int predicted, std::uint64_t n = 1) {
        counts_.at(static_cast<std::size_t>(truth) * classes_ +
                   static_cast<std::size_t>(predicted)) += n;
    }
    std::uint64_t at(std::size_t truth, std::size_t predicted) const {
        return counts_[truth * classes_ + predicted];
    }
    std::size_t classes() const { return classes_; }
    std::uint64_t total() const;
    std::uint64_t trace() const;

private:
    std::size_t classes_;
    std::vector<std::uint64_t> counts_;
};

struct MacroMetrics {
    double accuracy = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    double specificity = 0.0;
};

/// Macro-averaged metrics from row/column sums. Classes with a zero
/// denominator contribute 0 to that metric's mean.
MacroMetrics macro_metrics(const ConfusionMatrix& cm);

/// Packs dataset rows `indices` into a batch, truncating each sample's time
/// axis to cfg.target_seq_len leading steps.
std::pair<Tensor<float>, std::vector<int>> make_batch(
    const Dataset& ds, std::span<const std::size_t> indices,
    const ModelConfig& cfg);

/// Eval-mode pass over the whole dataset; argmax ties resolve to the lowest
/// class index.
ConfusionMatrix evaluate(const ParameterSet<float>& params, const Dataset& ds,
                         const ModelConfig& cfg, std::size_t batch_size = 32);

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
    OptimizerConfig optimizer;
    std::size_t epochs = 100;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    std::size_t scheduler_patience = 5;
    double scheduler_factor = 0.5;
    std::size_t early_stop_patience = 20;
    std::size_t max_steps = 0;  // 0 = unlimited; caps total optimizer steps
};

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double val_recall = 0.0;
    double val_precision = 0.0;
    double val_f1 = 0.0;
    double val_specificity = 0.0;
};

struct TrainResult {
    ParameterSet<float> params;  // best-epoch snapshot
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_accuracy = 0.0;
    std::size_t steps = 0;
};

/// Shuffled mini-batch AdamW training with plateau scheduling and early
/// stopping on validation accuracy. Aborts with DivergenceError on a
/// non-finite loss.
TrainResult train(const ModelConfig& model_cfg, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& cfg);

// History persistence (tab-separated, one record per epoch).
void write_history(const std::filesystem::path& path,
                   std::span<const EpochRecord> history);
std::vector<EpochRecord> read_history(const std::filesystem::path& path);

}  // namespace skyfuse
