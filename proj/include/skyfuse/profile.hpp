#pragma once

#include <cstdint>
#include <string>

#include "skyfuse/model.hpp"

namespace skyfuse {

struct ProfileReport {
    std::size_t parameter_count = 0;
    double flops_per_sample = 0.0;   // forward pass, multiply-add = 2 ops
    double throughput_fps = 0.0;     // samples per second after warmup
    double throughput_cov = 0.0;     // coefficient of variation across iters
    std::size_t batch_size = 0;
    std::size_t warmup_iters = 0;
    std::size_t measured_iters = 0;
    std::string environment;
};

/// Closed-form forward-pass FLOPs for one sample of `seq_len` steps,
/// counting 2*m*n*k per matrix product and nothing else (bias adds,
/// softmax, GELU and normalization are excluded). Term by term:
///   projection        2 L F D
///   per encoder layer 3 * 2 L D D   (Q, K, V projections)
///                     2 L L D       (attention scores)
///                     2 L L D       (attention times values)
///                     2 L D D       (output projection)
///                     2 L D H + 2 L H D  (feed-forward)
///   classifier head   2 D 512 + 2 * 512 K  (after pooling, one row)
double estimate_flops(const ModelConfig& cfg, std::size_t seq_len);

/// Eval-mode forward throughput on synthesized inputs. Warmup iterations
/// run first and are excluded from the measurement.
ProfileReport benchmark_fps(const ParameterSet<float>& params,
                            const ModelConfig& cfg, std::size_t batch,
                            std::size_t warmup, std::size_t iters,
                            std::uint64_t seed);

/// Fills the analysis half of a report (counts and FLOPs) without timing.
ProfileReport analyze_model(const ModelConfig& cfg, std::size_t seq_len);

std::string format_profile_report(const ProfileReport& report);
ProfileReport parse_profile_report(const std::string& text);

}  // namespace skyfuse
