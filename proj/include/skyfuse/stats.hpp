#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace skyfuse {

/// Equal-width histogram with normalized bin masses.
struct Histogram {
    std::vector<double> bin_edges;      // B+1, strictly ascending
    std::vector<double> probabilities;  // B, sums to 1
    std::uint64_t count = 0;
};

/// Values outside [lo, hi] are clamped into the boundary bins.
Histogram histogram(std::span<const float> data, std::size_t bins, double lo,
                    double hi);

/// Streaming variant for data that is produced in chunks.
class HistogramBuilder {
public:
    HistogramBuilder(std::size_t bins, double lo, double hi);
    void add(double value);
    void add(std::span<const float> values);
    Histogram finish() const;

private:
    double lo_, hi_, width_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

/// KL divergence D(P || Q) in nats over identically binned histograms.
/// Returns exactly 0 for bin-wise identical inputs; otherwise Q is
/// epsilon-smoothed (1e-10, renormalized) so empty Q bins stay finite.
double kl_divergence(const Histogram& p, const Histogram& q);

struct DistributionSummary {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double std = 0.0;  // population (ddof 0)
    std::uint64_t count = 0;
};

/// Single-pass Welford accumulator.
class SummaryBuilder {
public:
    void add(double value);
    void add(std::span<const float> values);
    DistributionSummary finish() const;
    std::uint64_t count() const { return count_; }

private:
    std::uint64_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    double min_ = 0.0;
    double max_ = 0.0;
};

DistributionSummary summarize(std::span<const float> data);

/// Per-modality distribution comparison: raw inputs, the cyclically
/// replicated raw stream, and the extracted features.
struct ModalityDistributions {
    std::string modality;
    DistributionSummary raw;
    DistributionSummary replicated;
    DistributionSummary processed;
    double kl_raw_vs_replicated = 0.0;
    double kl_raw_vs_processed = 0.0;
};

struct ReplicationReport {
    std::size_t bins = 100;
    std::vector<ModalityDistributions> modalities;
};

/// Builds one modality entry. Divergences are estimated with `bins`
/// equal-width bins spanning the joint min/max of each compared pair.
ModalityDistributions compare_distributions(const std::string& modality,
                                            std::span<const float> raw,
                                            std::span<const float> replicated,
                                            std::span<const float> processed,
                                            std::size_t bins = 100);

std::string format_replication_report(const ReplicationReport& report);
ReplicationReport parse_replication_report(const std::string& text);

// Round-trip-exact float <-> text used by every text format in the project.
std::string double_str(double v);
double parse_double(const std::string& s);
std::uint64_t parse_u64(const std::string& s);

}  // namespace skyfuse
