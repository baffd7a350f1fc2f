#include "skyfuse/profile.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "skyfuse/stats.hpp"

namespace skyfuse {

double estimate_flops(const ModelConfig& cfg, std::size_t seq_len) {
    const double l = static_cast<double>(seq_len);
    const double f = static_cast<double>(cfg.feature_dim);
    const double d = static_cast<double>(cfg.d_model);
    const double h = static_cast<double>(cfg.dim_feedforward);
    const double k = static_cast<double>(cfg.num_classes);
    const double hidden = static_cast<double>(kHeadHidden);

    const double projection = 2.0 * l * f * d;
    const double qkv = 3.0 * 2.0 * l * d * d;
    const double scores = 2.0 * l * l * d;
    const double attend = 2.0 * l * l * d;
    const double out_proj = 2.0 * l * d * d;
    const double ffn = 2.0 * l * d * h + 2.0 * l * h * d;
    const double per_layer = qkv + scores + attend + out_proj + ffn;
    const double head = 2.0 * d * hidden + 2.0 * hidden * k;

    return projection + static_cast<double>(cfg.num_layers) * per_layer + head;
}

ProfileReport analyze_model(const ModelConfig& cfg, std::size_t seq_len) {
    ProfileReport report;
    report.parameter_count = param_count(cfg);
    report.flops_per_sample = estimate_flops(cfg, seq_len);
    return report;
}

namespace {

std::string environment_string() {
    std::ostringstream out;
#if defined(__clang__)
    out << "clang " << __clang_major__ << "." << __clang_minor__;
#elif defined(__GNUC__)
    out << "gcc " << __GNUC__ << "." << __GNUC_MINOR__;
#else
    out << "unknown-compiler";
#endif
#ifdef NDEBUG
    out << " release";
#else
    out << " debug";
#endif
    out << " single-thread";
    return out.str();
}

}  // namespace

ProfileReport benchmark_fps(const ParameterSet<float>& params,
                            const ModelConfig& cfg, std::size_t batch,
                            std::size_t warmup, std::size_t iters,
                            std::uint64_t seed) {
    if (iters < 1) throw ValueError("benchmark: need at least one iteration");
    if (batch < 1) throw ValueError("benchmark: batch must be positive");

    ProfileReport report = analyze_model(cfg, cfg.target_seq_len);
    report.batch_size = batch;
    report.warmup_iters = warmup;
    report.measured_iters = iters;
    report.environment = environment_string();

    Rng rng(derive_seed(seed, "benchmark"));
    Tensor<float> x({batch, cfg.target_seq_len, cfg.feature_dim});
    for (auto& v : x.values()) v = rng.uniform_f(-1.0f, 1.0f);
    const Var<float> input(std::move(x));

    NoGradGuard guard;
    Rng unused(0);
    volatile float sink = 0.0f;  // keep the forward pass observable
    for (std::size_t i = 0; i < warmup; ++i)
        sink = forward(input, params, cfg, false, unused).value()[0];

    using Clock = std::chrono::steady_clock;
    std::vector<double> seconds(iters);
    double total = 0.0;
    for (std::size_t i = 0; i < iters; ++i) {
        const auto start = Clock::now();
        sink = forward(input, params, cfg, false, unused).value()[0];
        const auto stop = Clock::now();
        seconds[i] = std::chrono::duration<double>(stop - start).count();
        total += seconds[i];
    }
    (void)sink;

    const double mean = total / static_cast<double>(iters);
    double variance = 0.0;
    for (double s : seconds) variance += (s - mean) * (s - mean);
    variance /= static_cast<double>(iters);

    report.throughput_fps = static_cast<double>(batch * iters) / total;
    report.throughput_cov = mean > 0.0 ? std::sqrt(variance) / mean : 0.0;
    return report;
}

std::string format_profile_report(const ProfileReport& report) {
    std::ostringstream out;
    out << "skyfuse-profile v1\n";
    out << "parameter_count=" << report.parameter_count << "\n";
    out << "flops_per_sample=" << double_str(report.flops_per_sample) << "\n";
    out << "gflops=" << double_str(report.flops_per_sample / 1e9) << "\n";
    out << "throughput_fps=" << double_str(report.throughput_fps) << "\n";
    out << "throughput_cov=" << double_str(report.throughput_cov) << "\n";
    out << "batch_size=" << report.batch_size << "\n";
    out << "warmup_iters=" << report.warmup_iters << "\n";
    out << "measured_iters=" << report.measured_iters << "\n";
    out << "environment=" << report.environment << "\n";
    return out.str();
}

ProfileReport parse_profile_report(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "skyfuse-profile v1")
        throw FormatError("profile report: bad header");
    ProfileReport report;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("profile report: bad line \"" + line + "\"");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "parameter_count") report.parameter_count = parse_u64(value);
        else if (key == "flops_per_sample") report.flops_per_sample = parse_double(value);
        else if (key == "gflops") continue;  // derived field
        else if (key == "throughput_fps") report.throughput_fps = parse_double(value);
        else if (key == "throughput_cov") report.throughput_cov = parse_double(value);
        else if (key == "batch_size") report.batch_size = parse_u64(value);
        else if (key == "warmup_iters") report.warmup_iters = parse_u64(value);
        else if (key == "measured_iters") report.measured_iters = parse_u64(value);
        else if (key == "environment") report.environment = value;
        else throw FormatError("profile report: unknown key \"" + key + "\"");
    }
    return report;
}

}  // namespace skyfuse
