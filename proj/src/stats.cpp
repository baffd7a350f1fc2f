#include "skyfuse/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "skyfuse/errors.hpp"

namespace skyfuse {

std::string double_str(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw FormatError("bad float literal: \"" + s + "\"");
    return v;
}

std::uint64_t parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw FormatError("bad integer literal: \"" + s + "\"");
    return v;
}

HistogramBuilder::HistogramBuilder(std::size_t bins, double lo, double hi)
    : lo_(lo), hi_(hi), width_((hi - lo) / static_cast<double>(bins)),
      counts_(bins, 0) {
    if (bins < 2) throw ValueError("histogram: need at least 2 bins");
    if (!(lo < hi)) throw ValueError("histogram: empty range [lo, hi)");
}

void HistogramBuilder::add(double value) {
    const std::size_t bins = counts_.size();
    double clamped = std::clamp(value, lo_, hi_);
    auto idx = static_cast<std::size_t>((clamped - lo_) / width_);
    if (idx >= bins) idx = bins - 1;
    ++counts_[idx];
    ++total_;
}

void HistogramBuilder::add(std::span<const float> values) {
    for (float v : values) add(static_cast<double>(v));
}

Histogram HistogramBuilder::finish() const {
    if (total_ == 0) throw ValueError("histogram: no data");
    Histogram h;
    const std::size_t bins = counts_.size();
    h.bin_edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        h.bin_edges[i] = lo_ + width_ * static_cast<double>(i);
    h.bin_edges[bins] = hi_;
    h.probabilities.resize(bins);
    for (std::size_t i = 0; i < bins; ++i)
        h.probabilities[i] =
            static_cast<double>(counts_[i]) / static_cast<double>(total_);
    h.count = total_;
    return h;
}

Histogram histogram(std::span<const float> data, std::size_t bins, double lo,
                    double hi) {
    HistogramBuilder builder(bins, lo, hi);
    builder.add(data);
    return builder.finish();
}

double kl_divergence(const Histogram& p, const Histogram& q) {
    if (p.bin_edges != q.bin_edges)
        throw ShapeError("kl_divergence: histograms use different bin edges");
    if (p.probabilities == q.probabilities) return 0.0;

    constexpr double kEps = 1e-10;
    double q_total = 0.0;
    for (double v : q.probabilities) q_total += v + kEps;

    double d = 0.0;
    for (std::size_t i = 0; i < p.probabilities.size(); ++i) {
        const double pi = p.probabilities[i];
        if (pi <= 0.0) continue;
        const double qi = (q.probabilities[i] + kEps) / q_total;
        d += pi * std::log(pi / qi);
    }
    return d;
}

void SummaryBuilder::add(double value) {
    if (count_ == 0) {
        min_ = max_ = value;
    } else {
        min_ = std::min(min_, value);
        max_ = std::max(max_, value);
    }
    ++count_;
    const double delta = value - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (value - mean_);
}

void SummaryBuilder::add(std::span<const float> values) {
    for (float v : values) add(static_cast<double>(v));
}

DistributionSummary SummaryBuilder::finish() const {
    if (count_ == 0) throw ValueError("summarize: no data");
    DistributionSummary s;
    s.count = count_;
    s.min = min_;
    s.max = max_;
    s.mean = mean_;
    s.std = std::sqrt(m2_ / static_cast<double>(count_));
    return s;
}

DistributionSummary summarize(std::span<const float> data) {
    SummaryBuilder b;
    b.add(data);
    return b.finish();
}

namespace {

std::pair<double, double> joint_range(std::span<const float> a,
                                      std::span<const float> b) {
    double lo = a.empty() ? 0.0 : a[0];
    double hi = lo;
    for (float v : a) {
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
    }
    for (float v : b) {
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
    }
    if (!(lo < hi)) hi = lo + 1.0;  // degenerate constant data
    return {lo, hi};
}

double paired_kl(std::span<const float> p_data, std::span<const float> q_data,
                 std::size_t bins) {
    const auto [lo, hi] = joint_range(p_data, q_data);
    return kl_divergence(histogram(p_data, bins, lo, hi),
                         histogram(q_data, bins, lo, hi));
}

}  // namespace

ModalityDistributions compare_distributions(const std::string& modality,
                                            std::span<const float> raw,
                                            std::span<const float> replicated,
                                            std::span<const float> processed,
                                            std::size_t bins) {
    ModalityDistributions d;
    d.modality = modality;
    d.raw = summarize(raw);
    d.replicated = summarize(replicated);
    d.processed = summarize(processed);
    d.kl_raw_vs_replicated = paired_kl(raw, replicated, bins);
    d.kl_raw_vs_processed = paired_kl(raw, processed, bins);
    return d;
}

namespace {

void emit_summary(std::ostringstream& out, const std::string& prefix,
                  const DistributionSummary& s) {
    out << prefix << ".count=" << s.count << "\n";
    out << prefix << ".min=" << double_str(s.min) << "\n";
    out << prefix << ".max=" << double_str(s.max) << "\n";
    out << prefix << ".mean=" << double_str(s.mean) << "\n";
    out << prefix << ".std=" << double_str(s.std) << "\n";
}

}  // namespace

std::string format_replication_report(const ReplicationReport& report) {
    std::ostringstream out;
    out << "skyfuse-replication-report v1\n";
    out << "bins=" << report.bins << "\n";
    for (const auto& m : report.modalities) {
        out << "\n[" << m.modality << "]\n";
        emit_summary(out, "raw", m.raw);
        emit_summary(out, "replicated", m.replicated);
        emit_summary(out, "processed", m.processed);
        out << "kl.raw_vs_replicated=" << double_str(m.kl_raw_vs_replicated) << "\n";
        out << "kl.raw_vs_processed=" << double_str(m.kl_raw_vs_processed) << "\n";
    }
    return out.str();
}

namespace {

DistributionSummary* summary_slot(ModalityDistributions& m,
                                  const std::string& prefix) {
    if (prefix == "raw") return &m.raw;
    if (prefix == "replicated") return &m.replicated;
    if (prefix == "processed") return &m.processed;
    return nullptr;
}

}  // namespace

ReplicationReport parse_replication_report(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "skyfuse-replication-report v1")
        throw FormatError("replication report: bad header");

    ReplicationReport report;
    ModalityDistributions* current = nullptr;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            report.modalities.push_back({});
            current = &report.modalities.back();
            current->modality = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("replication report: bad line \"" + line + "\"");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (!current) {
            if (key == "bins")
                report.bins = static_cast<std::size_t>(parse_u64(value));
            else
                throw FormatError("replication report: unexpected key " + key);
            continue;
        }
        const auto dot = key.find('.');
        if (dot == std::string::npos)
            throw FormatError("replication report: bad key " + key);
        const std::string head = key.substr(0, dot);
        const std::string tail = key.substr(dot + 1);
        if (head == "kl") {
            if (tail == "raw_vs_replicated")
                current->kl_raw_vs_replicated = parse_double(value);
            else if (tail == "raw_vs_processed")
                current->kl_raw_vs_processed = parse_double(value);
            else
                throw FormatError("replication report: bad key " + key);
            continue;
        }
        auto* slot = summary_slot(*current, head);
        if (!slot) throw FormatError("replication report: bad key " + key);
        if (tail == "count")
            slot->count = parse_u64(value);
        else if (tail == "min")
            slot->min = parse_double(value);
        else if (tail == "max")
            slot->max = parse_double(value);
        else if (tail == "mean")
            slot->mean = parse_double(value);
        else if (tail == "std")
            slot->std = parse_double(value);
        else
            throw FormatError("replication report: bad key " + key);
    }
    return report;
}

}  // namespace skyfuse
