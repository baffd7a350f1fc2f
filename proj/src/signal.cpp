#include "skyfuse/signal.hpp"

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>

#include "skyfuse/errors.hpp"

namespace skyfuse {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kAmin = 1e-10;  // power floor before taking logs

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<float> make_window(Window kind, std::size_t n) {
    std::vector<float> w(n, 1.0f);
    if (kind == Window::hann) {
        for (std::size_t i = 0; i < n; ++i)
            w[i] = static_cast<float>(
                0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / n)));
    }
    return w;
}

}  // namespace

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::audio: return "audio";
        case Modality::video_ir: return "video_ir";
        case Modality::video_rgb: return "video_rgb";
        case Modality::radar: return "radar";
    }
    return "?";
}

Modality modality_from_name(const std::string& name) {
    if (name == "audio") return Modality::audio;
    if (name == "video_ir") return Modality::video_ir;
    if (name == "video_rgb") return Modality::video_rgb;
    if (name == "radar") return Modality::radar;
    throw ValueError("unknown modality: " + name);
}

void SpectrogramConfig::validate() const {
    if (hop == 0 || hop > n_fft)
        throw ValueError("spectrogram: hop must lie in (0, n_fft], got hop=" +
                         std::to_string(hop) + " n_fft=" + std::to_string(n_fft));
    if (n_mels > n_fft / 2 + 1)
        throw ValueError("spectrogram: n_mels " + std::to_string(n_mels) +
                         " exceeds bin count " + std::to_string(n_fft / 2 + 1));
    if (floor_db >= 0.0)
        throw ValueError("spectrogram: floor_db must be negative");
}

std::size_t hop_for_target(std::size_t length, std::size_t n_fft,
                           std::size_t target_frames) {
    if (target_frames == 0) throw ValueError("hop_for_target: zero target");
    const std::size_t raw = length / target_frames;
    return std::clamp<std::size_t>(raw, 1, n_fft);
}

Tensor<float> stft_magnitude(const std::vector<float>& signal,
                             const SpectrogramConfig& cfg) {
    cfg.validate();
    if (signal.size() < cfg.n_fft)
        throw ValueError("stft: signal length " + std::to_string(signal.size()) +
                         " shorter than window " + std::to_string(cfg.n_fft));

    const std::size_t frames = 1 + (signal.size() - cfg.n_fft) / cfg.hop;
    const std::size_t bins = cfg.n_fft / 2 + 1;
    const auto window = make_window(cfg.window, cfg.n_fft);

    Eigen::FFT<float> fft;
    fft.SetFlag(Eigen::FFT<float>::HalfSpectrum);

    Tensor<float> out({frames, bins});
    std::vector<float> frame(cfg.n_fft);
    std::vector<std::complex<float>> spectrum;
    for (std::size_t t = 0; t < frames; ++t) {
        const float* src = signal.data() + t * cfg.hop;
        for (std::size_t i = 0; i < cfg.n_fft; ++i) frame[i] = src[i] * window[i];
        fft.fwd(spectrum, frame);
        for (std::size_t k = 0; k < bins; ++k) out(t, k) = std::abs(spectrum[k]);
    }
    return out;
}

Tensor<float> mel_filterbank(std::size_t n_mels, std::size_t n_fft,
                             double sample_rate) {
    const std::size_t bins = n_fft / 2 + 1;
    const double mel_max = hz_to_mel(sample_rate / 2.0);

    std::vector<double> hz_points(n_mels + 2);
    for (std::size_t i = 0; i < hz_points.size(); ++i)
        hz_points[i] = mel_to_hz(mel_max * static_cast<double>(i) / (n_mels + 1));

    Tensor<float> fb({n_mels, bins});
    for (std::size_t m = 0; m < n_mels; ++m) {
        const double lower = hz_points[m];
        const double center = hz_points[m + 1];
        const double upper = hz_points[m + 2];
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / n_fft;
            double w = 0.0;
            if (f > lower && f < upper) {
                w = f <= center ? (f - lower) / (center - lower)
                                : (upper - f) / (upper - center);
            }
            fb(m, k) = static_cast<float>(w);
        }
    }
    return fb;
}

Tensor<float> mel_spectrogram(const std::vector<float>& signal,
                              const SpectrogramConfig& cfg) {
    auto mag = stft_magnitude(signal, cfg);
    const auto fb = mel_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate);
    const std::size_t frames = mag.extent(0);
    const std::size_t bins = mag.extent(1);

    for (auto& v : mag.values()) v *= v;  // power

    using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> power(mag.data(), static_cast<Eigen::Index>(frames),
                                   static_cast<Eigen::Index>(bins));
    Eigen::Map<const RowMat> filters(fb.data(), static_cast<Eigen::Index>(cfg.n_mels),
                                     static_cast<Eigen::Index>(bins));
    Tensor<float> mel({frames, cfg.n_mels});
    Eigen::Map<RowMat> out(mel.data(), static_cast<Eigen::Index>(frames),
                           static_cast<Eigen::Index>(cfg.n_mels));
    out.noalias() = power * filters.transpose();
    return mel;
}

Tensor<float> to_decibel(const Tensor<float>& spec, double floor_db) {
    if (floor_db >= 0.0) throw ValueError("to_decibel: floor_db must be negative");
    double peak = 0.0;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        if (spec[i] < 0.0f)
            throw ValueError("to_decibel: negative input cell");
        peak = std::max(peak, static_cast<double>(spec[i]));
    }

    Tensor<float> out(spec.shape());
    if (peak <= kAmin) {
        // Degenerate all-zero input: reference collapses to the floor.
        std::fill(out.values().begin(), out.values().end(),
                  static_cast<float>(floor_db));
        return out;
    }
    const double ref_db = 10.0 * std::log10(peak);
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const double v = std::max(static_cast<double>(spec[i]), kAmin);
        const double db = 10.0 * std::log10(v) - ref_db;
        out[i] = static_cast<float>(std::clamp(db, floor_db, 0.0));
    }
    return out;
}

namespace {

/// Exact area-average resampling along one axis: dst cell i covers the
/// continuous source range [i*src/dst, (i+1)*src/dst).
void area_resample_rows(const float* src, std::size_t src_rows, std::size_t cols,
                        float* dst, std::size_t dst_rows) {
    const double scale = static_cast<double>(src_rows) / dst_rows;
    for (std::size_t r = 0; r < dst_rows; ++r) {
        const double lo = r * scale;
        const double hi = (r + 1) * scale;
        for (std::size_t c = 0; c < cols; ++c) dst[r * cols + c] = 0.0f;
        for (std::size_t p = static_cast<std::size_t>(lo);
             p < src_rows && static_cast<double>(p) < hi; ++p) {
            const double overlap =
                std::min(hi, static_cast<double>(p + 1)) - std::max(lo, static_cast<double>(p));
            if (overlap <= 0.0) continue;
            const float w = static_cast<float>(overlap / scale);
            for (std::size_t c = 0; c < cols; ++c)
                dst[r * cols + c] += w * src[p * cols + c];
        }
    }
}

}  // namespace

std::vector<float> video_frame_features(const Tensor<float>& frame) {
    if (frame.rank() != 3 || frame.extent(2) != 3)
        throw ValueError("video features: frame must be (H x W x 3), got " +
                         shape_str(frame.shape()));
    const std::size_t h = frame.extent(0);
    const std::size_t w = frame.extent(1);
    if (h < 8 || w < 8)
        throw ValueError("video features: frame smaller than 8x8");

    constexpr std::size_t kGridRows = 16;
    constexpr std::size_t kGridCols = 8;

    std::vector<float> gray(h * w);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const float* px = frame.data() + (i * w + j) * 3;
            gray[i * w + j] = 0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2];
        }

    std::vector<float> rows(kGridRows * w);
    area_resample_rows(gray.data(), h, w, rows.data(), kGridRows);

    // Column pass: transpose, resample, transpose back.
    std::vector<float> rows_t(w * kGridRows);
    for (std::size_t i = 0; i < kGridRows; ++i)
        for (std::size_t j = 0; j < w; ++j) rows_t[j * kGridRows + i] = rows[i * w + j];
    std::vector<float> cols_t(kGridCols * kGridRows);
    area_resample_rows(rows_t.data(), w, kGridRows, cols_t.data(), kGridCols);

    std::vector<float> features(kGridRows * kGridCols);
    for (std::size_t i = 0; i < kGridRows; ++i)
        for (std::size_t j = 0; j < kGridCols; ++j)
            features[i * kGridCols + j] = cols_t[j * kGridRows + i];
    return features;
}

Tensor<float> radar_features(const std::vector<std::complex<float>>& block,
                             const SpectrogramConfig& cfg, std::size_t keep_bins) {
    if (block.empty()) throw ValueError("radar features: empty input");
    std::vector<float> magnitude(block.size());
    for (std::size_t i = 0; i < block.size(); ++i) magnitude[i] = std::abs(block[i]);

    const auto mag_spec = stft_magnitude(magnitude, cfg);
    const std::size_t frames = mag_spec.extent(0);
    const std::size_t bins = std::min(mag_spec.extent(1), keep_bins);

    Tensor<float> trimmed({frames, bins});
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t k = 0; k < bins; ++k) trimmed(t, k) = mag_spec(t, k);
    return to_decibel(trimmed, cfg.floor_db);
}

Tensor<float> standardize_sequence(const Tensor<float>& seq, std::size_t rows,
                                   std::size_t cols) {
    if (seq.rank() != 2)
        throw ValueError("standardize: expected a (T x F) matrix, got " +
                         shape_str(seq.shape()));
    Tensor<float> out({rows, cols});
    const std::size_t t_copy = std::min(rows, seq.extent(0));
    const std::size_t f_copy = std::min(cols, seq.extent(1));
    for (std::size_t t = 0; t < t_copy; ++t)
        for (std::size_t f = 0; f < f_copy; ++f) out(t, f) = seq(t, f);
    return out;
}

FeatureMatrix audio_feature_matrix(const std::vector<float>& mono,
                                   const SpectrogramConfig& cfg) {
    const auto db = to_decibel(mel_spectrogram(mono, cfg), cfg.floor_db);
    return {standardize_sequence(db), Modality::audio};
}

FeatureMatrix video_feature_matrix(const Tensor<float>& frames, Modality which) {
    if (frames.rank() != 4 || frames.extent(3) != 3)
        throw ValueError("video features: expected (frames x H x W x 3), got " +
                         shape_str(frames.shape()));
    const std::size_t count = frames.extent(0);
    const std::size_t h = frames.extent(1);
    const std::size_t w = frames.extent(2);

    Tensor<float> seq({count, kTargetFeatures});
    for (std::size_t f = 0; f < count; ++f) {
        Tensor<float> one({h, w, 3},
                          std::vector<float>(frames.data() + f * h * w * 3,
                                             frames.data() + (f + 1) * h * w * 3));
        const auto features = video_frame_features(one);
        std::copy(features.begin(), features.end(), seq.data() + f * kTargetFeatures);
    }
    return {standardize_sequence(seq), which};
}

FeatureMatrix radar_feature_matrix(const std::vector<std::complex<float>>& block,
                                   const SpectrogramConfig& cfg) {
    return {standardize_sequence(radar_features(block, cfg)), Modality::radar};
}

}  // namespace skyfuse
