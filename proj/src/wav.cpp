#include "skyfuse/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "skyfuse/errors.hpp"

namespace skyfuse {

namespace {

template <typename T>
T read_le(std::istream& in, const char* what) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw FormatError(std::string("wav: truncated while reading ") + what);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open wav: " + path.string());

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0)
        throw FormatError("wav: missing RIFF header in " + path.string());
    read_le<std::uint32_t>(in, "riff size");
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0)
        throw FormatError("wav: not a WAVE file: " + path.string());

    bool have_fmt = false;
    std::uint16_t channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    std::vector<char> payload;

    while (in.read(tag, 4)) {
        const auto chunk_size = read_le<std::uint32_t>(in, "chunk size");
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            const auto format = read_le<std::uint16_t>(in, "format");
            channels = read_le<std::uint16_t>(in, "channels");
            sample_rate = read_le<std::uint32_t>(in, "sample rate");
            read_le<std::uint32_t>(in, "byte rate");
            read_le<std::uint16_t>(in, "block align");
            bits = read_le<std::uint16_t>(in, "bits");
            if (format != 1)
                throw FormatError("wav: only integer PCM supported (format " +
                                  std::to_string(format) + ") in " + path.string());
            if (bits != 16 && bits != 32)
                throw FormatError("wav: only 16- or 32-bit samples supported, got " +
                                  std::to_string(bits));
            if (channels == 0) throw FormatError("wav: zero channels");
            if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
            payload.resize(chunk_size);
            in.read(payload.data(), chunk_size);
            if (!in) throw FormatError("wav: truncated data chunk in " + path.string());
            break;
        } else {
            // Skip unknown chunks (LIST, fact, ...), honoring word alignment.
            in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
        }
    }
    if (!have_fmt || payload.empty())
        throw FormatError("wav: no PCM data found in " + path.string());

    WavData wav;
    wav.channels = channels;
    wav.sample_rate = sample_rate;
    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t count = payload.size() / bytes_per_sample;
    wav.samples.resize(count);
    if (bits == 16) {
        for (std::size_t i = 0; i < count; ++i) {
            std::int16_t v;
            std::memcpy(&v, payload.data() + i * 2, 2);
            wav.samples[i] = static_cast<float>(v) / 32768.0f;
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::int32_t v;
            std::memcpy(&v, payload.data() + i * 4, 4);
            wav.samples[i] = static_cast<float>(static_cast<double>(v) / 2147483648.0);
        }
    }
    return wav;
}

void write_wav(const std::filesystem::path& path,
               std::span<const float> interleaved, std::size_t channels,
               double sample_rate) {
    if (channels == 0) throw ValueError("wav: zero channels");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write wav: " + path.string());

    const std::uint32_t data_bytes =
        static_cast<std::uint32_t>(interleaved.size() * 2);
    const auto rate = static_cast<std::uint32_t>(sample_rate);
    const auto block_align = static_cast<std::uint16_t>(channels * 2);

    out.write("RIFF", 4);
    write_le<std::uint32_t>(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_le<std::uint32_t>(out, 16);
    write_le<std::uint16_t>(out, 1);  // integer PCM
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels));
    write_le<std::uint32_t>(out, rate);
    write_le<std::uint32_t>(out, rate * block_align);
    write_le<std::uint16_t>(out, block_align);
    write_le<std::uint16_t>(out, 16);
    out.write("data", 4);
    write_le<std::uint32_t>(out, data_bytes);
    for (float v : interleaved) {
        const long q = std::lrintf(std::clamp(v, -1.0f, 1.0f) * 32768.0f);
        write_le<std::int16_t>(
            out, static_cast<std::int16_t>(std::clamp<long>(q, -32768, 32767)));
    }
    if (!out) throw IoError("wav write failed: " + path.string());
}

std::vector<float> downmix_mono(const WavData& wav) {
    const std::size_t frames = wav.samples.size() / wav.channels;
    std::vector<float> mono(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        float acc = 0.0f;
        for (std::size_t c = 0; c < wav.channels; ++c)
            acc += wav.samples[f * wav.channels + c];
        mono[f] = acc / static_cast<float>(wav.channels);
    }
    return mono;
}

}  // namespace skyfuse
