#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "skyfuse/checkpoint.hpp"
#include "skyfuse/container.hpp"
#include "skyfuse/pipeline.hpp"
#include "skyfuse/profile.hpp"
#include "skyfuse/stats.hpp"
#include "skyfuse/train.hpp"

namespace fs = std::filesystem;
using namespace skyfuse;

namespace {

// Exit codes: 0 success, 2 usage, 3 I/O, 4 numeric divergence, 1 other.
constexpr int kUsageError = 2;
constexpr int kIoError = 3;
constexpr int kDivergenceError = 4;

struct SynthArgs {
    std::string out;
    std::size_t per_class = 2;
    std::uint64_t seed = 0;
    double audio_seconds = 1.0;
    double audio_rate = 8000.0;
    std::size_t video_frames = 24;
    std::size_t video_size = 32;
    std::size_t radar_frames = 100;
    std::size_t radar_width = 256;
};

struct PreprocessArgs {
    std::string in;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t replication_target = 200;
    std::size_t video_cap = 10;
    std::size_t bins = 100;
    std::vector<double> split{0.55, 0.25, 0.20};
};

struct TrainArgs {
    std::string data;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t epochs = 100;
    std::size_t batch_size = 16;
    double lr = 1e-4;
    double weight_decay = 1e-2;
    std::size_t max_steps = 0;
    std::size_t scheduler_patience = 5;
    double scheduler_factor = 0.5;
    std::size_t early_stop_patience = 20;
    ModelConfig model;
};

struct EvaluateArgs {
    std::string checkpoint;
    std::string data;
    std::string split = "test";
    std::size_t batch_size = 32;
    std::string out;
};

struct ProfileArgs {
    std::string checkpoint;
    std::size_t batch = 1;
    std::size_t warmup = 5;
    std::size_t iters = 10;
    std::uint64_t seed = 0;
    bool no_benchmark = false;
    std::string out;
    ModelConfig model;
};

struct InferArgs {
    std::string checkpoint;
    std::string input;
    std::size_t index = 0;
};

void add_model_options(CLI::App* cmd, ModelConfig& model) {
    cmd->add_option("--feature-dim", model.feature_dim, "Input feature width")
        ->capture_default_str();
    cmd->add_option("--seq-len", model.target_seq_len,
                    "Time steps consumed per sample (leading rows)")
        ->capture_default_str();
    cmd->add_option("--d-model", model.d_model, "Embedding width")
        ->capture_default_str();
    cmd->add_option("--heads", model.num_heads, "Attention heads")
        ->capture_default_str();
    cmd->add_option("--layers", model.num_layers, "Encoder layers")
        ->capture_default_str();
    cmd->add_option("--ffn", model.dim_feedforward, "Feed-forward width")
        ->capture_default_str();
    cmd->add_option("--dropout", model.dropout, "Dropout rate")
        ->capture_default_str();
    cmd->add_option("--classes", model.num_classes, "Class count")
        ->capture_default_str();
}

void write_run_config(const fs::path& dir, const CLI::App& app) {
    std::ofstream out(dir / "run_config.ini", std::ios::trunc);
    out << app.config_to_str(true, false);
}

int run_synth(const SynthArgs& args) {
    SynthConfig cfg;
    cfg.per_class = args.per_class;
    cfg.seed = args.seed;
    cfg.audio_seconds = args.audio_seconds;
    cfg.audio_rate = args.audio_rate;
    cfg.video_frames = args.video_frames;
    cfg.video_size = args.video_size;
    cfg.radar_frames = args.radar_frames;
    cfg.radar_width = args.radar_width;
    write_synth_dataset(args.out, cfg);
    std::cout << "wrote synthetic dataset to " << args.out << " ("
              << cfg.per_class << " records per class per modality)\n";
    return 0;
}

int run_preprocess(const PreprocessArgs& args, const CLI::App& app) {
    if (args.split.size() != 3)
        throw ValueError("--split expects three comma-separated fractions");
    PreprocessConfig cfg;
    cfg.replication_target = args.replication_target;
    cfg.video_cap = args.video_cap;
    cfg.seed = args.seed;
    cfg.histogram_bins = args.bins;
    cfg.split.train_fraction = args.split[0];
    cfg.split.val_fraction = args.split[1];
    cfg.split.test_fraction = args.split[2];
    cfg.split.validate();

    const auto result = ::skyfuse::run_preprocess(args.in, cfg);
    save_preprocess_output(args.out, result);
    write_run_config(args.out, app);

    std::cout << "fused " << result.splits.train.samples.size() << "/"
              << result.splits.val.samples.size() << "/"
              << result.splits.test.samples.size()
              << " train/val/test samples into " << args.out << "\n";
    for (const auto& m : result.report.modalities)
        std::cout << m.modality
                  << ": kl(raw||replicated)=" << double_str(m.kl_raw_vs_replicated)
                  << " kl(raw||processed)=" << double_str(m.kl_raw_vs_processed)
                  << "\n";
    return 0;
}

int run_train(const TrainArgs& args, const CLI::App& app) {
    const auto train_set = load_split(args.data, "train");
    const auto val_set = load_split(args.data, "val");

    TrainConfig cfg;
    cfg.optimizer.learning_rate = args.lr;
    cfg.optimizer.weight_decay = args.weight_decay;
    cfg.epochs = args.epochs;
    cfg.batch_size = args.batch_size;
    cfg.seed = args.seed;
    cfg.max_steps = args.max_steps;
    cfg.scheduler_patience = args.scheduler_patience;
    cfg.scheduler_factor = args.scheduler_factor;
    cfg.early_stop_patience = args.early_stop_patience;

    args.model.validate();
    auto result = train(args.model, train_set, val_set, cfg);

    std::error_code ec;
    fs::create_directories(args.out, ec);
    if (ec) throw IoError("cannot create output directory: " + args.out);
    save_checkpoint(fs::path(args.out) / "model.ckpt", args.model,
                    train_set.class_names, result.params);
    write_history(fs::path(args.out) / "history.tsv", result.history);
    write_run_config(args.out, app);

    std::cout << "trained " << result.history.size() << " epochs ("
              << result.steps << " steps); best validation accuracy "
              << double_str(result.best_val_accuracy) << " at epoch "
              << result.best_epoch << "\n";
    std::cout << "checkpoint: " << (fs::path(args.out) / "model.ckpt").string()
              << "\n";
    return 0;
}

void print_evaluation(std::ostream& out, const ConfusionMatrix& cm,
                      const MacroMetrics& m,
                      const std::vector<std::string>& class_names) {
    out << "confusion matrix (rows = true, columns = predicted)\n";
    out << "class";
    for (const auto& name : class_names) out << "\t" << name;
    out << "\n";
    for (std::size_t t = 0; t < cm.classes(); ++t) {
        out << class_names[t];
        for (std::size_t p = 0; p < cm.classes(); ++p) out << "\t" << cm.at(t, p);
        out << "\n";
    }
    out << "\n[metrics]\n";
    out << "accuracy=" << double_str(m.accuracy) << "\n";
    out << "recall_macro=" << double_str(m.recall) << "\n";
    out << "precision_macro=" << double_str(m.precision) << "\n";
    out << "f1_macro=" << double_str(m.f1) << "\n";
    out << "specificity_macro=" << double_str(m.specificity) << "\n";
}

int run_evaluate(const EvaluateArgs& args) {
    auto ckpt = load_checkpoint(args.checkpoint);
    const auto ds = load_split(args.data, args.split);
    const auto cm = evaluate(ckpt.params, ds, ckpt.config, args.batch_size);
    const auto metrics = macro_metrics(cm);

    print_evaluation(std::cout, cm, metrics, ckpt.class_names);
    if (!args.out.empty()) {
        std::ofstream file(args.out, std::ios::trunc);
        if (!file) throw IoError("cannot write " + args.out);
        print_evaluation(file, cm, metrics, ckpt.class_names);
    }
    return 0;
}

int run_profile(const ProfileArgs& args) {
    ModelConfig cfg = args.model;
    ParameterSet<float> params;
    bool have_params = false;
    if (!args.checkpoint.empty()) {
        auto ckpt = load_checkpoint(args.checkpoint);
        cfg = ckpt.config;
        params = std::move(ckpt.params);
        have_params = true;
    }
    cfg.validate();

    ProfileReport report;
    if (args.no_benchmark) {
        report = analyze_model(cfg, cfg.target_seq_len);
    } else {
        if (!have_params) params = init_params<float>(cfg, args.seed);
        report = benchmark_fps(params, cfg, args.batch, args.warmup, args.iters,
                               args.seed);
    }

    const auto text = format_profile_report(report);
    std::cout << text;
    std::cout << "\n[summary]\n";
    std::cout << "parameters_millions="
              << double_str(static_cast<double>(report.parameter_count) / 1e6)
              << "\n";
    std::cout << "gflops_per_sample="
              << double_str(report.flops_per_sample / 1e9) << "\n";
    if (!args.no_benchmark)
        std::cout << "fps=" << double_str(report.throughput_fps) << "\n";
    if (!args.out.empty()) {
        std::ofstream file(args.out, std::ios::trunc);
        if (!file) throw IoError("cannot write " + args.out);
        file << text;
    }
    return 0;
}

int run_infer(const InferArgs& args) {
    auto ckpt = load_checkpoint(args.checkpoint);
    auto data = container_to_tensor(load_container(args.input));

    Tensor<float> sample;
    if (data.rank() == 2) {
        sample = std::move(data);
    } else if (data.rank() == 3) {
        if (args.index >= data.extent(0))
            throw ValueError("--index " + std::to_string(args.index) +
                             " out of range for " + std::to_string(data.extent(0)) +
                             " samples");
        const std::size_t stride = data.extent(1) * data.extent(2);
        sample = Tensor<float>({data.extent(1), data.extent(2)},
                               std::vector<float>(data.data() + args.index * stride,
                                                  data.data() +
                                                      (args.index + 1) * stride));
    } else {
        throw FormatError("infer: container must be (T x F) or (N x T x F)");
    }

    Dataset one;
    one.class_names = ckpt.class_names;
    one.samples.push_back({std::move(sample), 0});
    const std::vector<std::size_t> idx{0};
    auto [x, labels] = make_batch(one, idx, ckpt.config);

    NoGradGuard guard;
    Rng unused(0);
    const auto logits =
        forward(Var<float>(std::move(x)), ckpt.params, ckpt.config, false, unused);
    const auto probs = softmax(logits, 1);

    for (std::size_t k = 0; k < ckpt.config.num_classes; ++k)
        std::cout << ckpt.class_names.at(k) << "="
                  << double_str(static_cast<double>(probs.value()(0, k))) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skyfuse: multimodal aerial-object classification pipeline"};
    app.set_config("--config", "", "INI config file; command-line flags override it");
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd =
        app.add_subcommand("synth", "Generate a labeled synthetic dataset");
    synth_cmd->add_option("--out", synth.out, "Dataset directory")->required();
    synth_cmd->add_option("--per-class", synth.per_class,
                          "Records per class per modality")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", synth.seed, "Generator seed")
        ->capture_default_str();
    synth_cmd->add_option("--audio-seconds", synth.audio_seconds, "Clip length")
        ->capture_default_str();
    synth_cmd->add_option("--audio-rate", synth.audio_rate, "Sample rate")
        ->capture_default_str();
    synth_cmd->add_option("--video-frames", synth.video_frames, "Frames per clip")
        ->capture_default_str();
    synth_cmd->add_option("--video-size", synth.video_size, "Frame edge length")
        ->capture_default_str();
    synth_cmd->add_option("--radar-frames", synth.radar_frames, "Radar frames")
        ->capture_default_str();
    synth_cmd->add_option("--radar-width", synth.radar_width, "Radar windows")
        ->capture_default_str();

    PreprocessArgs pre;
    auto* pre_cmd = app.add_subcommand(
        "preprocess", "Load, replicate, extract, normalize, fuse, and split");
    pre_cmd->add_option("--in", pre.in, "Raw dataset directory")->required();
    pre_cmd->add_option("--out", pre.out, "Output directory")->required();
    pre_cmd->add_option("--seed", pre.seed, "Pipeline seed")->capture_default_str();
    pre_cmd->add_option("--replication-target", pre.replication_target,
                        "Per-modality sample count after replication")
        ->capture_default_str();
    pre_cmd->add_option("--video-cap", pre.video_cap, "Max videos per label")
        ->capture_default_str();
    pre_cmd->add_option("--bins", pre.bins, "Histogram bins for the report")
        ->capture_default_str();
    pre_cmd->add_option("--split", pre.split,
                        "Train,val,test fractions (e.g. 0.55,0.25,0.20)")
        ->delimiter(',')
        ->expected(3)
        ->capture_default_str();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train the classifier");
    train_cmd->add_option("--data", tr.data, "Preprocessed dataset directory")
        ->required();
    train_cmd->add_option("--out", tr.out, "Checkpoint/history directory")
        ->required();
    train_cmd->add_option("--seed", tr.seed, "Training seed")->capture_default_str();
    train_cmd->add_option("--epochs", tr.epochs, "Epoch cap")->capture_default_str();
    train_cmd->add_option("--batch-size", tr.batch_size, "Mini-batch size")
        ->capture_default_str();
    train_cmd->add_option("--lr", tr.lr, "Learning rate")->capture_default_str();
    train_cmd->add_option("--weight-decay", tr.weight_decay, "Decoupled decay")
        ->capture_default_str();
    train_cmd->add_option("--max-steps", tr.max_steps,
                          "Optimizer step cap (0 = unlimited)")
        ->capture_default_str();
    train_cmd->add_option("--scheduler-patience", tr.scheduler_patience,
                          "Epochs without improvement before the rate drops")
        ->capture_default_str();
    train_cmd->add_option("--scheduler-factor", tr.scheduler_factor,
                          "Learning-rate reduction factor")
        ->capture_default_str();
    train_cmd->add_option("--early-stop-patience", tr.early_stop_patience,
                          "Epochs without improvement before stopping")
        ->capture_default_str();
    add_model_options(train_cmd, tr.model);

    EvaluateArgs ev;
    auto* eval_cmd =
        app.add_subcommand("evaluate", "Confusion matrix and macro metrics");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Trained model")->required();
    eval_cmd->add_option("--data", ev.data, "Preprocessed dataset directory")
        ->required();
    eval_cmd->add_option("--split", ev.split, "Split name (train/val/test)")
        ->capture_default_str();
    eval_cmd->add_option("--batch-size", ev.batch_size, "Evaluation batch")
        ->capture_default_str();
    eval_cmd->add_option("--out", ev.out, "Also write the report here");

    ProfileArgs prof;
    auto* prof_cmd = app.add_subcommand(
        "profile", "Parameter count, FLOPs estimate, and inference throughput");
    prof_cmd->add_option("--checkpoint", prof.checkpoint,
                         "Profile this trained model");
    prof_cmd->add_option("--batch", prof.batch, "Benchmark batch size")
        ->capture_default_str();
    prof_cmd->add_option("--warmup", prof.warmup, "Warmup iterations")
        ->capture_default_str();
    prof_cmd->add_option("--iters", prof.iters, "Measured iterations")
        ->capture_default_str();
    prof_cmd->add_option("--seed", prof.seed, "Input synthesis seed")
        ->capture_default_str();
    prof_cmd->add_flag("--no-benchmark", prof.no_benchmark,
                       "Analysis only (skip timing)");
    prof_cmd->add_option("--out", prof.out, "Also write the report here");
    add_model_options(prof_cmd, prof.model);

    InferArgs inf;
    auto* infer_cmd =
        app.add_subcommand("infer", "Class probabilities for one sample");
    infer_cmd->add_option("--checkpoint", inf.checkpoint, "Trained model")
        ->required();
    infer_cmd->add_option("--input", inf.input, "Sample container (T x F)")
        ->required();
    infer_cmd->add_option("--index", inf.index,
                          "Sample index inside an (N x T x F) container")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    }

    try {
        if (synth_cmd->parsed()) return run_synth(synth);
        if (pre_cmd->parsed()) return run_preprocess(pre, app);
        if (train_cmd->parsed()) return run_train(tr, app);
        if (eval_cmd->parsed()) return run_evaluate(ev);
        if (prof_cmd->parsed()) return run_profile(prof);
        if (infer_cmd->parsed()) return run_infer(inf);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDivergenceError;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIoError;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIoError;
    } catch (const ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
