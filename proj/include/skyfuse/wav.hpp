#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace skyfuse {

/// PCM audio with interleaved channels, samples scaled into [-1, 1].
struct WavData {
    std::vector<float> samples;  // frame-interleaved
    std::size_t channels = 1;
    double sample_rate = 44100.0;
};

/// Reads an integer-PCM WAV file (16- or 32-bit). Samples are divided by
/// 2^(bits-1). Anything else (float PCM, ADPCM, 8/24-bit) is rejected.
WavData read_wav(const std::filesystem::path& path);

/// Writes 16-bit integer PCM.
void write_wav(const std::filesystem::path& path,
               std::span<const float> interleaved, std::size_t channels,
               double sample_rate);

/// Averages channels into one mono series.
std::vector<float> downmix_mono(const WavData& wav);

}  // namespace skyfuse
