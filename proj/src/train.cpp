#include "skyfuse/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "skyfuse/stats.hpp"

namespace skyfuse {

void plateau_step(SchedulerState& state, double val_accuracy) {
    if (val_accuracy > state.best) {
        state.best = val_accuracy;
        state.since_improvement = 0;
        return;
    }
    if (++state.since_improvement > state.patience) {
        state.lr *= state.factor;
        state.since_improvement = 0;
    }
}

bool early_stop_step(EarlyStopState& state, double val_accuracy,
                     ParameterSet<float>& params, std::size_t epoch) {
    if (val_accuracy > state.best_accuracy) {
        state.best_accuracy = val_accuracy;
        state.best_epoch = epoch;
        state.since_improvement = 0;
        state.snapshot = params.clone();
        return false;
    }
    ++state.since_improvement;
    return state.since_improvement >= state.patience;
}

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t t = 0;
    for (std::size_t k = 0; k < classes_; ++k) t += at(k, k);
    return t;
}

MacroMetrics macro_metrics(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (total == 0) throw ValueError("macro_metrics: empty confusion matrix");
    const std::size_t k = cm.classes();

    auto ratio = [](std::uint64_t num, std::uint64_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };

    MacroMetrics m;
    for (std::size_t c = 0; c < k; ++c) {
        std::uint64_t row = 0, col = 0;
        for (std::size_t j = 0; j < k; ++j) {
            row += cm.at(c, j);
            col += cm.at(j, c);
        }
        const std::uint64_t tp = cm.at(c, c);
        const std::uint64_t fn = row - tp;
        const std::uint64_t fp = col - tp;
        const std::uint64_t tn = total - tp - fn - fp;

        const double recall = ratio(tp, tp + fn);
        const double precision = ratio(tp, tp + fp);
        m.recall += recall;
        m.precision += precision;
        m.specificity += ratio(tn, tn + fp);
        m.f1 += precision + recall > 0.0
                    ? 2.0 * precision * recall / (precision + recall)
                    : 0.0;
    }
    m.recall /= static_cast<double>(k);
    m.precision /= static_cast<double>(k);
    m.specificity /= static_cast<double>(k);
    m.f1 /= static_cast<double>(k);
    m.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
    return m;
}

std::pair<Tensor<float>, std::vector<int>> make_batch(
    const Dataset& ds, std::span<const std::size_t> indices,
    const ModelConfig& cfg) {
    if (indices.empty()) throw ValueError("make_batch: empty index list");
    Tensor<float> x({indices.size(), cfg.target_seq_len, cfg.feature_dim});
    std::vector<int> labels(indices.size());
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const auto& sample = ds.samples.at(indices[b]);
        const auto& f = sample.features;
        if (f.rank() != 2 || f.extent(0) < cfg.target_seq_len ||
            f.extent(1) != cfg.feature_dim)
            throw ShapeError("make_batch: sample shape " + shape_str(f.shape()) +
                             " cannot feed a (" + std::to_string(cfg.target_seq_len) +
                             " x " + std::to_string(cfg.feature_dim) + ") model");
        const std::size_t cols = f.extent(1);
        for (std::size_t t = 0; t < cfg.target_seq_len; ++t)
            std::copy(f.data() + t * cols, f.data() + t * cols + cfg.feature_dim,
                      x.data() + (b * cfg.target_seq_len + t) * cfg.feature_dim);
        labels[b] = sample.label;
    }
    return {std::move(x), std::move(labels)};
}

namespace {

std::vector<int> argmax_rows(const Tensor<float>& logits) {
    const std::size_t rows = logits.extent(0);
    const std::size_t cols = logits.extent(1);
    std::vector<int> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < cols; ++c)
            if (logits(r, c) > logits(r, best)) best = c;  // ties keep the lowest
        out[r] = static_cast<int>(best);
    }
    return out;
}

}  // namespace

ConfusionMatrix evaluate(const ParameterSet<float>& params, const Dataset& ds,
                         const ModelConfig& cfg, std::size_t batch_size) {
    if (ds.samples.empty()) throw ValueError("evaluate: empty dataset");
    NoGradGuard guard;
    Rng unused(0);
    ConfusionMatrix cm(cfg.num_classes);
    std::vector<std::size_t> indices(ds.samples.size());
    std::iota(indices.begin(), indices.end(), 0);
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const std::size_t count = std::min(batch_size, indices.size() - start);
        auto [x, labels] =
            make_batch(ds, std::span(indices).subspan(start, count), cfg);
        const auto logits =
            forward(Var<float>(std::move(x)), params, cfg, false, unused);
        const auto predicted = argmax_rows(logits.value());
        for (std::size_t i = 0; i < count; ++i) cm.add(labels[i], predicted[i]);
    }
    return cm;
}

TrainResult train(const ModelConfig& model_cfg, const Dataset& train_set,
                  const Dataset& val_set, const TrainConfig& cfg) {
    model_cfg.validate();
    cfg.optimizer.validate();
    if (train_set.samples.empty() || val_set.samples.empty())
        throw ValueError("train: datasets must be non-empty");
    if (train_set.class_names != val_set.class_names)
        throw ValueError("train: train/val class sets differ");

    TrainResult result;
    result.params = init_params<float>(model_cfg, derive_seed(cfg.seed, "init"));
    if (cfg.epochs == 0) return result;

    auto named = result.params.named();
    std::vector<AdamState<float>> opt_state(named.size());

    SchedulerState scheduler;
    scheduler.patience = cfg.scheduler_patience;
    scheduler.factor = cfg.scheduler_factor;
    scheduler.lr = cfg.optimizer.learning_rate;
    EarlyStopState stopper;
    stopper.patience = cfg.early_stop_patience;

    Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
    std::vector<std::size_t> order(train_set.samples.size());
    std::iota(order.begin(), order.end(), 0);

    std::size_t step = 0;
    bool out_of_steps = false;
    for (std::size_t epoch = 1; epoch <= cfg.epochs && !out_of_steps; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, "epoch-shuffle", epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double loss_sum = 0.0;
        std::uint64_t seen = 0, correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            if (cfg.max_steps > 0 && step >= cfg.max_steps) {
                out_of_steps = true;
                break;
            }
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);
            auto [bx, labels] =
                make_batch(train_set, std::span(order).subspan(start, count),
                           model_cfg);
            const Var<float> x(std::move(bx));
            const auto logits =
                forward(x, result.params, model_cfg, /*training=*/true, dropout_rng);
            const auto loss = cross_entropy(logits, labels);
            const double batch_loss = static_cast<double>(loss.value()[0]);
            if (!std::isfinite(batch_loss))
                throw DivergenceError("train: non-finite loss at step " +
                                      std::to_string(step + 1) + " (epoch " +
                                      std::to_string(epoch) + ")");

            for (auto& p : named) p.var->zero_grad();
            backward(loss);
            ++step;
            for (std::size_t i = 0; i < named.size(); ++i) {
                if (!named[i].var->has_grad()) continue;
                adamw_step<float>(named[i].var->tensor(), named[i].var->grad(),
                                  opt_state[i], cfg.optimizer, step, scheduler.lr,
                                  named[i].decay);
            }

            loss_sum += batch_loss * static_cast<double>(count);
            const auto predicted = argmax_rows(logits.value());
            for (std::size_t i = 0; i < count; ++i)
                if (predicted[i] == labels[i]) ++correct;
            seen += count;
        }
        if (seen == 0) break;  // step budget exhausted before this epoch

        const auto cm = evaluate(result.params, val_set, model_cfg, cfg.batch_size);
        const auto metrics = macro_metrics(cm);

        EpochRecord record;
        record.epoch = epoch;
        record.lr = scheduler.lr;
        record.train_loss = loss_sum / static_cast<double>(seen);
        record.train_accuracy =
            static_cast<double>(correct) / static_cast<double>(seen);
        record.val_accuracy = metrics.accuracy;
        record.val_recall = metrics.recall;
        record.val_precision = metrics.precision;
        record.val_f1 = metrics.f1;
        record.val_specificity = metrics.specificity;
        result.history.push_back(record);

        plateau_step(scheduler, metrics.accuracy);
        if (early_stop_step(stopper, metrics.accuracy, result.params, epoch)) break;
    }

    result.steps = step;
    result.best_epoch = stopper.best_epoch;
    result.best_val_accuracy = stopper.best_accuracy;
    if (stopper.snapshot) result.params = std::move(*stopper.snapshot);
    return result;
}

void write_history(const std::filesystem::path& path,
                   std::span<const EpochRecord> history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write history: " + path.string());
    out << "epoch\tlr\ttrain_loss\ttrain_acc\tval_acc\tval_recall\t"
           "val_precision\tval_f1\tval_specificity\n";
    for (const auto& r : history)
        out << r.epoch << "\t" << double_str(r.lr) << "\t"
            << double_str(r.train_loss) << "\t" << double_str(r.train_accuracy)
            << "\t" << double_str(r.val_accuracy) << "\t"
            << double_str(r.val_recall) << "\t" << double_str(r.val_precision)
            << "\t" << double_str(r.val_f1) << "\t"
            << double_str(r.val_specificity) << "\n";
}

std::vector<EpochRecord> read_history(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open history: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("epoch\t", 0) != 0)
        throw FormatError("history: missing header line");
    std::vector<EpochRecord> history;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string token;
        std::vector<std::string> tokens;
        while (std::getline(fields, token, '\t')) tokens.push_back(token);
        if (tokens.size() != 9)
            throw FormatError("history: bad record \"" + line + "\"");
        EpochRecord r;
        r.epoch = parse_u64(tokens[0]);
        r.lr = parse_double(tokens[1]);
        r.train_loss = parse_double(tokens[2]);
        r.train_accuracy = parse_double(tokens[3]);
        r.val_accuracy = parse_double(tokens[4]);
        r.val_recall = parse_double(tokens[5]);
        r.val_precision = parse_double(tokens[6]);
        r.val_f1 = parse_double(tokens[7]);
        r.val_specificity = parse_double(tokens[8]);
        history.push_back(r);
    }
    return history;
}

}  // namespace skyfuse
