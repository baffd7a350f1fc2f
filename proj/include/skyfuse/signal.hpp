#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "skyfuse/tensor.hpp"

namespace skyfuse {

/// Standardized feature-matrix extents every modality is brought to.
inline constexpr std::size_t kTargetTimeSteps = 1000;
inline constexpr std::size_t kTargetFeatures = 128;

enum class Modality { audio, video_ir, video_rgb, radar };

const char* modality_name(Modality m);
Modality modality_from_name(const std::string& name);

/// One standardized observation: (time steps x features) values plus the
/// sensor it came from.
struct FeatureMatrix {
    Tensor<float> values;  // (kTargetTimeSteps x kTargetFeatures)
    Modality modality = Modality::audio;
};

enum class Window { hann, rect };

struct SpectrogramConfig {
    std::size_t n_fft = 2048;
    std::size_t hop = 512;
    std::size_t n_mels = 128;
    double sample_rate = 44100.0;
    double floor_db = -80.0;
    Window window = Window::hann;

    void validate() const;
};

/// Hop that lands close to `target_frames` frames for a signal of `length`
/// samples, clamped into the valid (0, n_fft] range.
std::size_t hop_for_target(std::size_t length, std::size_t n_fft,
                           std::size_t target_frames);

/// Windowed one-sided magnitude spectrogram, (frames x n_fft/2+1).
Tensor<float> stft_magnitude(const std::vector<float>& signal,
                             const SpectrogramConfig& cfg);

/// Triangular filterbank on the HTK Mel scale, (n_mels x n_fft/2+1) weights.
Tensor<float> mel_filterbank(std::size_t n_mels, std::size_t n_fft,
                             double sample_rate);

/// Mel-band power spectrogram, (frames x n_mels).
Tensor<float> mel_spectrogram(const std::vector<float>& signal,
                              const SpectrogramConfig& cfg);

/// Peak-referenced decibel conversion: the matrix maximum maps to 0 dB and
/// everything is clamped below at floor_db. An all-zero matrix maps entirely
/// to floor_db.
Tensor<float> to_decibel(const Tensor<float>& spec, double floor_db);

/// 128 features for one video frame: grayscale, exact area-average onto a
/// 16x8 grid, flattened row-major. `frame` is (H x W x 3) in [0, 1].
std::vector<float> video_frame_features(const Tensor<float>& frame);

/// Flattens a complex block to its magnitude series and runs the
/// spectrogram chain, keeping the first `keep_bins` frequency bins.
Tensor<float> radar_features(const std::vector<std::complex<float>>& block,
                             const SpectrogramConfig& cfg,
                             std::size_t keep_bins = kTargetFeatures);

/// Truncates/zero-pads a (T x F) matrix to (rows x cols).
Tensor<float> standardize_sequence(const Tensor<float>& seq,
                                   std::size_t rows = kTargetTimeSteps,
                                   std::size_t cols = kTargetFeatures);

// Per-modality chains ending in a standardized FeatureMatrix.
FeatureMatrix audio_feature_matrix(const std::vector<float>& mono,
                                   const SpectrogramConfig& cfg);
FeatureMatrix video_feature_matrix(const Tensor<float>& frames, Modality which);
FeatureMatrix radar_feature_matrix(const std::vector<std::complex<float>>& block,
                                   const SpectrogramConfig& cfg);

}  // namespace skyfuse
