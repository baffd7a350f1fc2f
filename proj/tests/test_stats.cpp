#include <doctest.h>

#include <cmath>
#include <vector>

#include "skyfuse/errors.hpp"
#include "skyfuse/rng.hpp"
#include "skyfuse/stats.hpp"

using namespace skyfuse;

TEST_CASE("histogram of a uniform grid is flat") {
    std::vector<float> grid(1000);
    for (std::size_t i = 0; i < grid.size(); ++i)
        grid[i] = static_cast<float>(i) / 1000.0f;
    const auto h = histogram(grid, 10, 0.0, 1.0);
    for (double p : h.probabilities)
        CHECK(p == doctest::Approx(0.1).epsilon(1.0 / 1000.0));
}

TEST_CASE("histogram of constant data concentrates in one bin") {
    std::vector<float> data(57, 3.25f);
    const auto h = histogram(data, 8, 0.0, 8.0);
    double total = 0.0;
    std::size_t nonzero = 0;
    for (double p : h.probabilities) {
        total += p;
        if (p > 0) ++nonzero;
    }
    CHECK(nonzero == 1);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("histogram clamps outliers yet stays normalized") {
    Rng rng(301);
    std::vector<float> data(5000);
    for (auto& v : data) v = rng.uniform_f(-10.0f, 10.0f);
    const auto h = histogram(data, 20, -1.0, 1.0);
    double total = 0.0;
    for (double p : h.probabilities) total += p;
    CHECK(std::abs(total - 1.0) <= 1e-9);
    // Boundary bins absorb the clamped mass.
    CHECK(h.probabilities.front() > 0.2);
    CHECK(h.probabilities.back() > 0.2);
}

TEST_CASE("histogram mean of a normal sample is near zero") {
    Rng rng(307);
    const std::size_t n = 200000;
    HistogramBuilder builder(100, -4.0, 4.0);
    for (std::size_t i = 0; i < n; ++i) builder.add(rng.normal());
    const auto h = builder.finish();
    double mean = 0.0;
    for (std::size_t i = 0; i < h.probabilities.size(); ++i) {
        const double center = 0.5 * (h.bin_edges[i] + h.bin_edges[i + 1]);
        mean += center * h.probabilities[i];
    }
    CHECK(std::abs(mean) <= 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("histogram rejects bad arguments") {
    std::vector<float> data{1.0f};
    CHECK_THROWS_AS(histogram(data, 1, 0.0, 1.0), ValueError);
    CHECK_THROWS_AS(histogram(data, 10, 1.0, 1.0), ValueError);
    CHECK_THROWS_AS(histogram({}, 10, 0.0, 1.0), ValueError);
}

TEST_CASE("kl divergence hand oracle") {
    Histogram p{{0.0, 0.5, 1.0}, {0.5, 0.5}, 100};
    Histogram q{{0.0, 0.5, 1.0}, {0.25, 0.75}, 100};
    // 0.5*ln(0.5/0.25) + 0.5*ln(0.5/0.75)
    const double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
    CHECK(kl_divergence(p, q) == doctest::Approx(expected).epsilon(1e-6));
    CHECK(kl_divergence(p, q) == doctest::Approx(0.1438).epsilon(1e-3));
}

TEST_CASE("kl divergence of identical histograms is exactly zero") {
    Histogram p{{0.0, 1.0, 2.0, 3.0}, {0.2, 0.3, 0.5}, 10};
    CHECK(kl_divergence(p, p) == 0.0);
}

TEST_CASE("kl divergence is non-negative and asymmetric") {
    Rng rng(311);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<float> a(400), b(400);
        for (auto& v : a) v = static_cast<float>(rng.normal());
        for (auto& v : b) v = static_cast<float>(rng.normal() * 1.5 + 0.3);
        const auto ha = histogram(a, 30, -6.0, 6.0);
        const auto hb = histogram(b, 30, -6.0, 6.0);
        CHECK(kl_divergence(ha, hb) >= 0.0);
        CHECK(kl_divergence(hb, ha) >= 0.0);
    }
    // A pinned asymmetric pair.
    Histogram p{{0.0, 0.5, 1.0}, {0.9, 0.1}, 10};
    Histogram q{{0.0, 0.5, 1.0}, {0.5, 0.5}, 10};
    CHECK(kl_divergence(p, q) != kl_divergence(q, p));
}

TEST_CASE("kl divergence requires identical edges") {
    Histogram p{{0.0, 0.5, 1.0}, {0.5, 0.5}, 10};
    Histogram q{{0.0, 0.6, 1.0}, {0.5, 0.5}, 10};
    CHECK_THROWS_AS(kl_divergence(p, q), ShapeError);
}

TEST_CASE("kl divergence survives empty target bins via smoothing") {
    Histogram p{{0.0, 0.5, 1.0}, {0.5, 0.5}, 10};
    Histogram q{{0.0, 0.5, 1.0}, {1.0, 0.0}, 10};
    const double d = kl_divergence(p, q);
    CHECK(std::isfinite(d));
    CHECK(d > 0.0);
}

TEST_CASE("summarize hand cases") {
    const std::vector<float> v{1.0f, 2.0f, 3.0f};
    const auto s = summarize(v);
    CHECK(s.min == 1.0);
    CHECK(s.max == 3.0);
    CHECK(s.mean == doctest::Approx(2.0));
    CHECK(s.std == doctest::Approx(0.8165).epsilon(1e-4));
    CHECK(s.count == 3);

    const std::vector<float> constant(10, 4.5f);
    CHECK(summarize(constant).std == doctest::Approx(0.0));

    const std::vector<float> single{7.0f};
    const auto one = summarize(single);
    CHECK(one.min == 7.0);
    CHECK(one.max == 7.0);
    CHECK(one.mean == 7.0);
    CHECK(one.std == 0.0);

    CHECK_THROWS_AS(summarize({}), ValueError);
}

TEST_CASE("summarize matches a two-pass reference on a large stream") {
    Rng rng(313);
    const std::size_t n = 1000000;
    std::vector<float> data(n);
    for (auto& v : data) v = static_cast<float>(rng.normal() * 3.0 + 100.0);

    const auto s = summarize(data);

    long double total = 0.0L;
    for (float v : data) total += v;
    const double ref_mean = static_cast<double>(total / n);
    long double sq = 0.0L;
    for (float v : data) {
        const long double d = static_cast<long double>(v) - ref_mean;
        sq += d * d;
    }
    const double ref_std = std::sqrt(static_cast<double>(sq / n));

    CHECK(std::abs(s.mean - ref_mean) <= 1e-6 * std::abs(ref_mean));
    CHECK(std::abs(s.std - ref_std) <= 1e-6 * std::abs(ref_std));
}

TEST_CASE("distribution comparison orders replication below processing") {
    Rng rng(317);
    std::vector<float> raw(3000);
    for (auto& v : raw) v = rng.uniform_f(-1.0f, 1.0f);
    // Exact whole-multiple replication: identical histogram, zero divergence.
    std::vector<float> replicated;
    for (int rep = 0; rep < 3; ++rep)
        replicated.insert(replicated.end(), raw.begin(), raw.end());
    // A feature-extraction stand-in with a genuinely different distribution.
    std::vector<float> processed(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        processed[i] = -40.0f + 20.0f * raw[i] * raw[i];

    const auto d = compare_distributions("audio", raw, replicated, processed);
    CHECK(d.kl_raw_vs_replicated == 0.0);
    CHECK(d.kl_raw_vs_processed > d.kl_raw_vs_replicated);
    CHECK(d.raw.count == 3000);
    CHECK(d.replicated.count == 9000);
}

TEST_CASE("replication report round trips through its file format") {
    ReplicationReport report;
    report.bins = 100;
    ModalityDistributions m;
    m.modality = "radar";
    m.raw = {-1.5, 2.25, 0.125, 0.33333333333333331, 1000};
    m.replicated = {-1.5, 2.25, 0.125, 0.33333333333333331, 5000};
    m.processed = {-80.0, 0.0, -36.430700000000002, 9.2167999999999992, 3840};
    m.kl_raw_vs_replicated = 0.0;
    m.kl_raw_vs_processed = 2.2214;
    report.modalities.push_back(m);

    const std::string text = format_replication_report(report);
    const auto parsed = parse_replication_report(text);
    REQUIRE(parsed.modalities.size() == 1);
    const auto& r = parsed.modalities[0];
    CHECK(parsed.bins == 100);
    CHECK(r.modality == "radar");
    CHECK(r.raw.min == m.raw.min);
    CHECK(r.raw.mean == m.raw.mean);
    CHECK(r.processed.std == m.processed.std);
    CHECK(r.kl_raw_vs_processed == m.kl_raw_vs_processed);
    // Formatting once more reproduces the same bytes.
    CHECK(format_replication_report(parsed) == text);
}

TEST_CASE("double text round trip is exact") {
    Rng rng(331);
    for (int i = 0; i < 200; ++i) {
        const double v = rng.normal() * std::pow(10.0, rng.uniform(-8.0, 8.0));
        CHECK(parse_double(double_str(v)) == v);
    }
    CHECK(parse_double(double_str(0.2)) == 0.2);
    CHECK_THROWS_AS(parse_double("not-a-number"), FormatError);
}
