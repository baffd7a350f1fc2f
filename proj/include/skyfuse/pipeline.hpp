#pragma once

#include <array>
#include <complex>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "skyfuse/errors.hpp"
#include "skyfuse/signal.hpp"
#include "skyfuse/stats.hpp"
#include "skyfuse/tensor.hpp"

namespace skyfuse {

/// The closed five-class label set, in canonical (id) order.
inline constexpr std::array<const char*, 5> kClassNames = {
    "airplane", "background", "bird", "drone", "helicopter"};
inline constexpr std::size_t kNumClasses = 5;

std::vector<std::string> class_name_vector();

struct AudioPayload {
    std::vector<float> samples;  // frame-interleaved
    std::size_t channels = 1;
    double sample_rate = 44100.0;
};

struct VideoPayload {
    Tensor<float> frames;  // (frames x H x W x 3) in [0, 1]
};

struct RadarPayload {
    Shape shape;
    std::vector<std::complex<float>> block;
};

/// One labeled raw observation straight from disk.
struct RawRecord {
    Modality modality = Modality::audio;
    int label = -1;
    std::string source_name;
    std::variant<AudioPayload, VideoPayload, RadarPayload> payload;
};

/// Explicit filename -> class mapping for files whose names carry no class
/// keyword (radar tracks).
using LabelManifest = std::map<std::string, int>;

/// Case-insensitive keyword scan over the filename, falling back to the
/// manifest. Throws ValueError naming the file when neither resolves.
int label_from_filename(const std::string& name,
                        const LabelManifest& manifest = {});

LabelManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const LabelManifest& manifest);

RawRecord load_wav_record(const std::filesystem::path& path,
                          const LabelManifest& manifest = {});
RawRecord load_container_record(const std::filesystem::path& path, Modality modality,
                                const LabelManifest& manifest = {});

/// Keeps frames at even indices (halves the frame rate).
Tensor<float> frame_rate_reduce(const Tensor<float>& frames);

/// Keeps at most `cap` video records per (modality, label); order is stable
/// and non-video records pass through untouched.
std::vector<RawRecord> per_label_cap(std::vector<RawRecord> records,
                                     std::size_t cap = 10);

/// output[i] = items[i mod N]; target must be >= N (no subsampling).
template <typename T>
std::vector<T> cyclic_replicate(const std::vector<T>& items, std::size_t target) {
    if (items.empty()) throw ValueError("cyclic_replicate: empty input");
    if (target < items.size())
        throw ValueError("cyclic_replicate: target " + std::to_string(target) +
                         " below input count " + std::to_string(items.size()));
    std::vector<T> out;
    out.reserve(target);
    for (std::size_t i = 0; i < target; ++i) out.push_back(items[i % items.size()]);
    return out;
}

struct NormalizationStats {
    Modality modality = Modality::audio;
    double mu = 0.0;
    double sigma = 1.0;  // > 0 after the epsilon floor
};

struct LabeledFeatures {
    FeatureMatrix features;
    int label = -1;
};

/// Fits mu/sigma over every element of one modality's matrices (population
/// sigma, 1e-8 floor) and applies (x - mu) / sigma in place.
NormalizationStats zscore_fit_apply(std::vector<LabeledFeatures>& matrices,
                                    Modality modality);

struct Sample {
    Tensor<float> features;  // (kTargetTimeSteps x kTargetFeatures)
    int label = -1;
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<std::string> class_names = class_name_vector();

    std::vector<std::size_t> class_counts() const;
};

/// Concatenates equally sized per-modality sample lists along the sample
/// dimension. Labels are carried through.
Dataset fuse(const std::vector<std::vector<LabeledFeatures>>& modality_sets);

void shuffle_dataset(Dataset& ds, std::uint64_t seed);

struct SplitSpec {
    double train_fraction = 0.55;
    double val_fraction = 0.25;
    double test_fraction = 0.20;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SplitResult {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Allocates n into parts proportional to `fractions` with largest-remainder
/// rounding; remainder ties go to the earlier part.
std::vector<std::size_t> largest_remainder_alloc(std::size_t n,
                                                 const std::vector<double>& fractions);

/// Per-class shuffle with the spec seed, then per-class largest-remainder
/// allocation into train/val/test. Every class needs at least 3 samples.
SplitResult stratified_split(Dataset ds, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Class-conditioned generators standing in for field recordings: tone
/// mixtures (audio), moving bright blobs (video), and micro-modulated
/// complex returns (radar). Distinct classes are separable by construction.
struct SynthConfig {
    std::size_t per_class = 2;
    std::uint64_t seed = 0;
    double audio_seconds = 1.0;
    double audio_rate = 8000.0;
    std::size_t video_frames = 24;
    std::size_t video_size = 32;    // square frames
    std::size_t radar_frames = 100;
    std::size_t radar_width = 256;
};

std::vector<RawRecord> synth_records(Modality modality, const SynthConfig& cfg);

/// Writes the four modality subdirectories plus the radar manifest under
/// `root`. Idempotent for a fixed config.
void write_synth_dataset(const std::filesystem::path& root, const SynthConfig& cfg);

// ---------------------------------------------------------------------------
// End-to-end preprocessing
// ---------------------------------------------------------------------------

struct PreprocessConfig {
    std::size_t replication_target = 200;
    std::size_t video_cap = 10;
    std::uint64_t seed = 0;
    std::size_t histogram_bins = 100;
    SplitSpec split;

    SpectrogramConfig audio_spec;  // hop filled per clip from hop_for_target
    SpectrogramConfig radar_spec;

    PreprocessConfig() {
        audio_spec.n_fft = 2048;
        audio_spec.n_mels = 128;
        radar_spec.n_fft = 256;
        radar_spec.n_mels = 64;  // unused by the radar chain; kept valid
    }
};

struct PreprocessResult {
    SplitResult splits;
    std::vector<NormalizationStats> stats;
    ReplicationReport report;
};

/// Full chain: load -> reduce/cap -> replicate -> extract -> normalize ->
/// fuse -> shuffle -> split, with distribution reporting along the way.
PreprocessResult run_preprocess(const std::filesystem::path& dataset_dir,
                                const PreprocessConfig& cfg);

// Split persistence: <name>.skyf (samples x T x F), <name>.labels (one class
// index per line), plus classes.txt, normalization.txt and the reports.
void save_split(const std::filesystem::path& dir, const std::string& name,
                const Dataset& ds);
Dataset load_split(const std::filesystem::path& dir, const std::string& name);

void save_preprocess_output(const std::filesystem::path& dir,
                            const PreprocessResult& result);

void write_normalization_stats(const std::filesystem::path& path,
                               const std::vector<NormalizationStats>& stats);
std::vector<NormalizationStats> read_normalization_stats(
    const std::filesystem::path& path);

}  // namespace skyfuse
