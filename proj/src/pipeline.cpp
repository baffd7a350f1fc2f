#include "skyfuse/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "skyfuse/container.hpp"
#include "skyfuse/rng.hpp"
#include "skyfuse/wav.hpp"

namespace skyfuse {

namespace fs = std::filesystem;

std::vector<std::string> class_name_vector() {
    return {kClassNames.begin(), kClassNames.end()};
}

namespace {

std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

constexpr double kSigmaFloor = 1e-8;

}  // namespace

int label_from_filename(const std::string& name, const LabelManifest& manifest) {
    const std::string hay = upper(name);
    for (std::size_t i = 0; i < kClassNames.size(); ++i) {
        if (hay.find(upper(kClassNames[i])) != std::string::npos)
            return static_cast<int>(i);
    }
    if (auto it = manifest.find(name); it != manifest.end()) return it->second;
    throw ValueError("cannot determine class for file \"" + name +
                     "\": no keyword and no manifest entry");
}

LabelManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    LabelManifest manifest;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw FormatError("manifest line " + std::to_string(lineno) +
                              " lacks a tab separator");
        const std::string file = line.substr(0, tab);
        const std::string cls = line.substr(tab + 1);
        const auto it = std::find(kClassNames.begin(), kClassNames.end(), cls);
        if (it == kClassNames.end())
            throw FormatError("manifest names unknown class \"" + cls + "\"");
        manifest[file] = static_cast<int>(it - kClassNames.begin());
    }
    return manifest;
}

void write_manifest(const fs::path& path, const LabelManifest& manifest) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    for (const auto& [file, label] : manifest)
        out << file << "\t" << kClassNames[static_cast<std::size_t>(label)] << "\n";
}

RawRecord load_wav_record(const fs::path& path, const LabelManifest& manifest) {
    const std::string name = path.filename().string();
    RawRecord record;
    record.modality = Modality::audio;
    record.label = label_from_filename(name, manifest);
    record.source_name = name;
    WavData wav = read_wav(path);
    record.payload = AudioPayload{std::move(wav.samples), wav.channels, wav.sample_rate};
    return record;
}

RawRecord load_container_record(const fs::path& path, Modality modality,
                                const LabelManifest& manifest) {
    const std::string name = path.filename().string();
    RawRecord record;
    record.modality = modality;
    record.label = label_from_filename(name, manifest);
    record.source_name = name;

    ContainerData data = load_container(path);
    if (modality == Modality::radar) {
        if (data.dtype != Dtype::c64)
            throw FormatError("radar container must be complex: " + path.string());
        record.payload = RadarPayload{std::move(data.shape), std::move(data.c64)};
    } else if (modality == Modality::video_ir || modality == Modality::video_rgb) {
        if (data.dtype != Dtype::f32 || data.shape.size() != 4 || data.shape[3] != 3)
            throw FormatError("video container must be f32 (frames x H x W x 3): " +
                              path.string());
        record.payload = VideoPayload{container_to_tensor(std::move(data))};
    } else {
        throw ValueError("container records are video or radar only");
    }
    return record;
}

Tensor<float> frame_rate_reduce(const Tensor<float>& frames) {
    if (frames.rank() != 4)
        throw ValueError("frame_rate_reduce: expected (frames x H x W x 3), got " +
                         shape_str(frames.shape()));
    const std::size_t n = frames.extent(0);
    const std::size_t kept = (n + 1) / 2;
    const std::size_t frame_size = frames.size() / n;
    Tensor<float> out({kept, frames.extent(1), frames.extent(2), frames.extent(3)});
    for (std::size_t i = 0; i < kept; ++i)
        std::copy(frames.data() + 2 * i * frame_size,
                  frames.data() + (2 * i + 1) * frame_size,
                  out.data() + i * frame_size);
    return out;
}

std::vector<RawRecord> per_label_cap(std::vector<RawRecord> records, std::size_t cap) {
    std::map<std::pair<int, int>, std::size_t> kept;
    std::vector<RawRecord> out;
    out.reserve(records.size());
    for (auto& r : records) {
        const bool video =
            r.modality == Modality::video_ir || r.modality == Modality::video_rgb;
        if (video) {
            auto& count = kept[{static_cast<int>(r.modality), r.label}];
            if (count >= cap) continue;
            ++count;
        }
        out.push_back(std::move(r));
    }
    return out;
}

NormalizationStats zscore_fit_apply(std::vector<LabeledFeatures>& matrices,
                                    Modality modality) {
    if (matrices.empty()) throw ValueError("zscore: no matrices");
    SummaryBuilder acc;
    for (const auto& m : matrices) acc.add(m.features.values.values());
    const auto s = acc.finish();

    NormalizationStats stats;
    stats.modality = modality;
    stats.mu = s.mean;
    stats.sigma = std::max(s.std, kSigmaFloor);

    const auto mu = static_cast<float>(stats.mu);
    const auto inv_sigma = static_cast<float>(1.0 / stats.sigma);
    for (auto& m : matrices)
        for (auto& v : m.features.values.values()) v = (v - mu) * inv_sigma;
    return stats;
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (const auto& s : samples) counts.at(static_cast<std::size_t>(s.label))++;
    return counts;
}

Dataset fuse(const std::vector<std::vector<LabeledFeatures>>& modality_sets) {
    if (modality_sets.empty()) throw ValueError("fuse: no modality sets");
    const std::size_t t = modality_sets.front().size();
    for (const auto& set : modality_sets)
        if (set.size() != t)
            throw ShapeError("fuse: modality sets have unequal lengths (" +
                             std::to_string(set.size()) + " vs " + std::to_string(t) +
                             ")");
    if (t == 0) throw ValueError("fuse: empty modality sets");

    Dataset ds;
    ds.samples.reserve(modality_sets.size() * t);
    for (const auto& set : modality_sets) {
        for (const auto& lf : set) {
            if (lf.features.values.shape() !=
                Shape{kTargetTimeSteps, kTargetFeatures})
                throw ShapeError("fuse: matrix shape " +
                                 shape_str(lf.features.values.shape()) +
                                 " is not the standardized " +
                                 shape_str({kTargetTimeSteps, kTargetFeatures}));
            if (lf.label < 0 || lf.label >= static_cast<int>(kNumClasses))
                throw ValueError("fuse: label " + std::to_string(lf.label) +
                                 " outside the class set");
            ds.samples.push_back({Tensor<float>(lf.features.values.shape(),
                                                lf.features.values.values()),
                                  lf.label});
        }
    }
    return ds;
}

void shuffle_dataset(Dataset& ds, std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t i = ds.samples.size(); i > 1; --i)
        std::swap(ds.samples[i - 1], ds.samples[rng.below(i)]);
}

void SplitSpec::validate() const {
    if (train_fraction <= 0.0 || val_fraction <= 0.0 || test_fraction <= 0.0)
        throw ValueError("split: all fractions must be positive");
    const double total = train_fraction + val_fraction + test_fraction;
    if (std::abs(total - 1.0) > 1e-9)
        throw ValueError("split: fractions sum to " + double_str(total) +
                         ", expected 1");
}

std::vector<std::size_t> largest_remainder_alloc(std::size_t n,
                                                 const std::vector<double>& fractions) {
    std::vector<std::size_t> alloc(fractions.size());
    std::vector<double> remainders(fractions.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        const double quota = fractions[i] * static_cast<double>(n);
        alloc[i] = static_cast<std::size_t>(quota);
        remainders[i] = quota - static_cast<double>(alloc[i]);
        assigned += alloc[i];
    }
    std::vector<std::size_t> order(fractions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return remainders[a] > remainders[b];
    });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned)
        alloc[order[i % order.size()]]++;
    return alloc;
}

SplitResult stratified_split(Dataset ds, const SplitSpec& spec) {
    spec.validate();
    const std::size_t k = ds.class_names.size();

    std::vector<std::vector<std::size_t>> by_class(k);
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        by_class.at(static_cast<std::size_t>(ds.samples[i].label)).push_back(i);

    for (std::size_t c = 0; c < k; ++c)
        if (!by_class[c].empty() && by_class[c].size() < 3)
            throw ValueError("split: class \"" + ds.class_names[c] + "\" has only " +
                             std::to_string(by_class[c].size()) +
                             " samples; need at least 3");

    SplitResult result;
    result.train.class_names = ds.class_names;
    result.val.class_names = ds.class_names;
    result.test.class_names = ds.class_names;

    const std::vector<double> fractions{spec.train_fraction, spec.val_fraction,
                                        spec.test_fraction};
    for (std::size_t c = 0; c < k; ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        Rng rng(derive_seed(spec.seed, "split-class", c));
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.below(i)]);

        const auto alloc = largest_remainder_alloc(idx.size(), fractions);
        std::size_t pos = 0;
        Dataset* targets[3] = {&result.train, &result.val, &result.test};
        for (std::size_t part = 0; part < 3; ++part)
            for (std::size_t j = 0; j < alloc[part]; ++j, ++pos)
                targets[part]->samples.push_back(std::move(ds.samples[idx[pos]]));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

namespace {

constexpr double kPi = 3.14159265358979323846;

RawRecord synth_audio(int cls, std::size_t idx, const SynthConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, "synth-audio",
                        static_cast<std::uint64_t>(cls) * 1000003ull + idx));
    const auto frames = static_cast<std::size_t>(cfg.audio_seconds * cfg.audio_rate);
    const double f0 = 300.0 * (cls + 1);
    const double phase0 = rng.uniform(0.0, 2.0 * kPi);
    const double phase1 = rng.uniform(0.0, 2.0 * kPi);
    const double drift = rng.uniform(0.97, 1.03);

    std::vector<float> interleaved(frames * 2);
    for (std::size_t t = 0; t < frames; ++t) {
        const double time = static_cast<double>(t) / cfg.audio_rate;
        const double base = 0.55 * std::sin(2.0 * kPi * f0 * drift * time + phase0) +
                            0.25 * std::sin(2.0 * kPi * 2.0 * f0 * time + phase1);
        const double left = base + 0.08 * rng.normal();
        const double right = base + 0.08 * rng.normal();
        interleaved[2 * t] = static_cast<float>(std::clamp(left, -1.0, 1.0));
        interleaved[2 * t + 1] = static_cast<float>(std::clamp(right, -1.0, 1.0));
    }
    RawRecord r;
    r.modality = Modality::audio;
    r.label = cls;
    r.payload = AudioPayload{std::move(interleaved), 2, cfg.audio_rate};
    return r;
}

RawRecord synth_video(Modality which, int cls, std::size_t idx,
                      const SynthConfig& cfg) {
    const char* tag = which == Modality::video_ir ? "synth-ir" : "synth-rgb";
    Rng rng(derive_seed(cfg.seed, tag,
                        static_cast<std::uint64_t>(cls) * 1000003ull + idx));
    const std::size_t n = cfg.video_frames;
    const std::size_t s = cfg.video_size;
    Tensor<float> frames({n, s, s, 3});

    // Class-specific vertical band for a bright moving blob; its grid row in
    // the 16x8 thumbnail separates the classes.
    const std::size_t blob = std::max<std::size_t>(2, s / 8);
    const std::size_t row0 = (static_cast<std::size_t>(cls) * s) / 5 + 1;
    const std::size_t speed = 1 + static_cast<std::size_t>(cls) % 3;
    const float backdrop = which == Modality::video_ir ? 0.05f : 0.12f;

    for (std::size_t t = 0; t < n; ++t) {
        float* frame = frames.data() + t * s * s * 3;
        for (std::size_t i = 0; i < s * s * 3; ++i)
            frame[i] = backdrop + 0.02f * static_cast<float>(rng.uniform());
        const std::size_t col0 = (2 + t * speed) % (s - blob);
        for (std::size_t i = row0; i < std::min(row0 + blob, s); ++i)
            for (std::size_t j = col0; j < col0 + blob; ++j)
                for (std::size_t c = 0; c < 3; ++c)
                    frame[(i * s + j) * 3 + c] = 0.95f;
    }
    RawRecord r;
    r.modality = which;
    r.label = cls;
    r.payload = VideoPayload{std::move(frames)};
    return r;
}

RawRecord synth_radar(int cls, std::size_t idx, const SynthConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, "synth-radar",
                        static_cast<std::uint64_t>(cls) * 1000003ull + idx));
    const std::size_t len = cfg.radar_frames * cfg.radar_width;
    // Micro-modulation of the return magnitude at a class-specific rate.
    const double bin = 13.0 * (cls + 1);
    std::vector<std::complex<float>> block(len);
    for (std::size_t i = 0; i < len; ++i) {
        const double mag = 1.0 + 0.75 * std::sin(2.0 * kPi * bin * i / 256.0) +
                           0.05 * rng.normal();
        const double phase = rng.uniform(0.0, 2.0 * kPi);
        block[i] = std::polar(static_cast<float>(std::abs(mag)),
                              static_cast<float>(phase));
    }
    RawRecord r;
    r.modality = Modality::radar;
    r.label = cls;
    r.payload = RadarPayload{{cfg.radar_frames, cfg.radar_width}, std::move(block)};
    return r;
}

std::string zero_pad(std::size_t v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

}  // namespace

std::vector<RawRecord> synth_records(Modality modality, const SynthConfig& cfg) {
    if (cfg.per_class == 0) throw ValueError("synth: per_class must be >= 1");
    std::vector<RawRecord> records;
    records.reserve(kNumClasses * cfg.per_class);
    for (int cls = 0; cls < static_cast<int>(kNumClasses); ++cls) {
        for (std::size_t i = 0; i < cfg.per_class; ++i) {
            switch (modality) {
                case Modality::audio: records.push_back(synth_audio(cls, i, cfg)); break;
                case Modality::video_ir:
                case Modality::video_rgb:
                    records.push_back(synth_video(modality, cls, i, cfg));
                    break;
                case Modality::radar: records.push_back(synth_radar(cls, i, cfg)); break;
            }
            auto& rec = records.back();
            const std::string suffix = zero_pad(i, 3);
            switch (modality) {
                case Modality::audio:
                    rec.source_name = upper(kClassNames[cls]) + "_" + suffix + ".wav";
                    break;
                case Modality::video_ir:
                    rec.source_name =
                        "IR_" + upper(kClassNames[cls]) + "_" + suffix + ".skyf";
                    break;
                case Modality::video_rgb:
                    rec.source_name =
                        "V_" + upper(kClassNames[cls]) + "_" + suffix + ".skyf";
                    break;
                case Modality::radar:
                    rec.source_name =
                        "track_" + zero_pad(cls * cfg.per_class + i, 4) + ".skyf";
                    break;
            }
        }
    }
    return records;
}

void write_synth_dataset(const fs::path& root, const SynthConfig& cfg) {
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create dataset directory: " + root.string());

    LabelManifest manifest;
    for (Modality m : {Modality::audio, Modality::video_ir, Modality::video_rgb,
                       Modality::radar}) {
        const fs::path dir = root / modality_name(m);
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create directory: " + dir.string());
        for (const auto& record : synth_records(m, cfg)) {
            const fs::path file = dir / record.source_name;
            if (const auto* audio = std::get_if<AudioPayload>(&record.payload)) {
                write_wav(file, audio->samples, audio->channels, audio->sample_rate);
            } else if (const auto* video = std::get_if<VideoPayload>(&record.payload)) {
                save_container(file, video->frames);
            } else if (const auto* radar = std::get_if<RadarPayload>(&record.payload)) {
                save_container(file, radar->shape, radar->block);
                manifest[record.source_name] = record.label;
            }
        }
    }
    write_manifest(root / "manifest.tsv", manifest);
}

// ---------------------------------------------------------------------------
// End-to-end preprocessing
// ---------------------------------------------------------------------------

namespace {

std::vector<fs::path> sorted_files(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::exists(dir)) return files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<RawRecord> load_modality_dir(const fs::path& root, Modality modality,
                                         const LabelManifest& manifest) {
    const fs::path dir = root / modality_name(modality);
    std::vector<RawRecord> records;
    for (const auto& file : sorted_files(dir)) {
        const std::string ext = file.extension().string();
        if (modality == Modality::audio && ext == ".wav")
            records.push_back(load_wav_record(file, manifest));
        else if (modality != Modality::audio && ext == ".skyf")
            records.push_back(load_container_record(file, modality, manifest));
    }
    if (records.empty())
        throw IoError("no input files for modality \"" +
                      std::string(modality_name(modality)) + "\" under " +
                      dir.string());
    return records;
}

void append_record_stream(const RawRecord& record, std::vector<float>& out) {
    if (const auto* audio = std::get_if<AudioPayload>(&record.payload)) {
        out.insert(out.end(), audio->samples.begin(), audio->samples.end());
    } else if (const auto* video = std::get_if<VideoPayload>(&record.payload)) {
        out.insert(out.end(), video->frames.values().begin(),
                   video->frames.values().end());
    } else if (const auto* radar = std::get_if<RadarPayload>(&record.payload)) {
        out.reserve(out.size() + radar->block.size());
        for (const auto& z : radar->block) out.push_back(std::abs(z));
    }
}

FeatureMatrix extract_features(const RawRecord& record, const PreprocessConfig& cfg) {
    if (const auto* audio = std::get_if<AudioPayload>(&record.payload)) {
        WavData wav{audio->samples, audio->channels, audio->sample_rate};
        const auto mono = downmix_mono(wav);
        SpectrogramConfig sc = cfg.audio_spec;
        sc.sample_rate = audio->sample_rate;
        sc.hop = hop_for_target(mono.size(), sc.n_fft, kTargetTimeSteps);
        return audio_feature_matrix(mono, sc);
    }
    if (const auto* video = std::get_if<VideoPayload>(&record.payload))
        return video_feature_matrix(video->frames, record.modality);
    const auto& radar = std::get<RadarPayload>(record.payload);
    SpectrogramConfig sc = cfg.radar_spec;
    sc.hop = hop_for_target(radar.block.size(), sc.n_fft, kTargetTimeSteps);
    return radar_feature_matrix(radar.block, sc);
}

}  // namespace

PreprocessResult run_preprocess(const fs::path& dataset_dir,
                                const PreprocessConfig& cfg) {
    LabelManifest manifest;
    if (fs::exists(dataset_dir / "manifest.tsv"))
        manifest = load_manifest(dataset_dir / "manifest.tsv");

    PreprocessResult result;
    result.report.bins = cfg.histogram_bins;

    std::vector<std::vector<LabeledFeatures>> modality_sets;
    for (Modality modality : {Modality::audio, Modality::video_ir,
                              Modality::video_rgb, Modality::radar}) {
        auto records = load_modality_dir(dataset_dir, modality, manifest);
        if (modality == Modality::video_ir || modality == Modality::video_rgb) {
            for (auto& r : records) {
                auto& video = std::get<VideoPayload>(r.payload);
                video.frames = frame_rate_reduce(video.frames);
            }
            records = per_label_cap(std::move(records), cfg.video_cap);
        }

        // Features once per distinct record; replication repeats matrices.
        std::vector<LabeledFeatures> features;
        features.reserve(records.size());
        for (const auto& r : records)
            features.push_back({extract_features(r, cfg), r.label});
        auto replicated = cyclic_replicate(features, cfg.replication_target);

        std::vector<float> raw_stream;
        for (const auto& r : records) append_record_stream(r, raw_stream);
        std::vector<float> replicated_stream;
        for (std::size_t i = 0; i < cfg.replication_target; ++i)
            append_record_stream(records[i % records.size()], replicated_stream);
        std::vector<float> processed_stream;
        processed_stream.reserve(replicated.size() * kTargetTimeSteps * kTargetFeatures);
        for (const auto& lf : replicated)
            processed_stream.insert(processed_stream.end(),
                                    lf.features.values.values().begin(),
                                    lf.features.values.values().end());

        result.report.modalities.push_back(
            compare_distributions(modality_name(modality), raw_stream,
                                  replicated_stream, processed_stream,
                                  cfg.histogram_bins));

        result.stats.push_back(zscore_fit_apply(replicated, modality));
        modality_sets.push_back(std::move(replicated));
    }

    Dataset fused = fuse(modality_sets);
    shuffle_dataset(fused, derive_seed(cfg.seed, "shuffle"));

    SplitSpec split = cfg.split;
    split.seed = derive_seed(cfg.seed, "split");
    result.splits = stratified_split(std::move(fused), split);
    return result;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void save_split(const fs::path& dir, const std::string& name, const Dataset& ds) {
    if (ds.samples.empty()) throw ValueError("save_split: empty dataset");
    Tensor<float> packed({ds.samples.size(), kTargetTimeSteps, kTargetFeatures});
    const std::size_t stride = kTargetTimeSteps * kTargetFeatures;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        std::copy(ds.samples[i].features.values().begin(),
                  ds.samples[i].features.values().end(),
                  packed.data() + i * stride);
    save_container(dir / (name + ".skyf"), packed);

    std::ofstream labels(dir / (name + ".labels"), std::ios::trunc);
    if (!labels) throw IoError("cannot write labels for split " + name);
    for (const auto& s : ds.samples) labels << s.label << "\n";
}

Dataset load_split(const fs::path& dir, const std::string& name) {
    auto packed = container_to_tensor(load_container(dir / (name + ".skyf")));
    if (packed.rank() != 3)
        throw FormatError("split container must be (samples x T x F)");

    std::ifstream labels(dir / (name + ".labels"));
    if (!labels) throw IoError("cannot open labels for split " + name);
    Dataset ds;
    if (fs::exists(dir / "classes.txt")) {
        std::ifstream classes(dir / "classes.txt");
        ds.class_names.clear();
        std::string line;
        while (std::getline(classes, line))
            if (!line.empty()) ds.class_names.push_back(line);
    }

    const std::size_t n = packed.extent(0);
    const std::size_t stride = packed.extent(1) * packed.extent(2);
    std::string line;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(labels, line))
            throw FormatError("label file shorter than container for split " + name);
        Sample s;
        s.label = static_cast<int>(parse_u64(line));
        if (s.label < 0 || s.label >= static_cast<int>(ds.class_names.size()))
            throw FormatError("label " + line + " outside the class set");
        s.features = Tensor<float>({packed.extent(1), packed.extent(2)},
                                   std::vector<float>(packed.data() + i * stride,
                                                      packed.data() + (i + 1) * stride));
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void write_normalization_stats(const fs::path& path,
                               const std::vector<NormalizationStats>& stats) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& s : stats) {
        out << modality_name(s.modality) << ".mu=" << double_str(s.mu) << "\n";
        out << modality_name(s.modality) << ".sigma=" << double_str(s.sigma) << "\n";
    }
}

std::vector<NormalizationStats> read_normalization_stats(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::map<std::string, NormalizationStats> by_modality;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto dot = line.find('.');
        const auto eq = line.find('=');
        if (dot == std::string::npos || eq == std::string::npos || eq < dot)
            throw FormatError("bad stats line: " + line);
        const std::string modality = line.substr(0, dot);
        const std::string field = line.substr(dot + 1, eq - dot - 1);
        const double value = parse_double(line.substr(eq + 1));
        auto& slot = by_modality[modality];
        slot.modality = modality_from_name(modality);
        if (field == "mu")
            slot.mu = value;
        else if (field == "sigma")
            slot.sigma = value;
        else
            throw FormatError("bad stats field: " + field);
    }
    std::vector<NormalizationStats> stats;
    for (Modality m : {Modality::audio, Modality::video_ir, Modality::video_rgb,
                       Modality::radar})
        if (auto it = by_modality.find(modality_name(m)); it != by_modality.end())
            stats.push_back(it->second);
    return stats;
}

void save_preprocess_output(const fs::path& dir, const PreprocessResult& result) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir.string());

    save_split(dir, "train", result.splits.train);
    save_split(dir, "val", result.splits.val);
    save_split(dir, "test", result.splits.test);

    std::ofstream classes(dir / "classes.txt", std::ios::trunc);
    for (const auto& name : result.splits.train.class_names) classes << name << "\n";

    write_normalization_stats(dir / "normalization.txt", result.stats);

    std::ofstream report(dir / "replication_report.txt", std::ios::trunc);
    report << format_replication_report(result.report);

    // Plot-ready numeric table.
    std::ofstream table(dir / "replication_table.tsv", std::ios::trunc);
    table << "modality\tstream\tcount\tmin\tmax\tmean\tstd\n";
    for (const auto& m : result.report.modalities) {
        const std::pair<const char*, const DistributionSummary*> rows[] = {
            {"raw", &m.raw}, {"replicated", &m.replicated}, {"processed", &m.processed}};
        for (const auto& [stream, s] : rows)
            table << m.modality << "\t" << stream << "\t" << s->count << "\t"
                  << double_str(s->min) << "\t" << double_str(s->max) << "\t"
                  << double_str(s->mean) << "\t" << double_str(s->std) << "\n";
    }
}

}  // namespace skyfuse
