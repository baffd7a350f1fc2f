#include "skyfuse/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "skyfuse/container.hpp"
#include "skyfuse/pipeline.hpp"
#include "skyfuse/stats.hpp"

namespace skyfuse {

namespace {

constexpr const char* kHeader = "SKYCKPT v1";

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ",";
        out += names[i];
    }
    return out;
}

std::vector<std::string> split_names(const std::string& joined) {
    std::vector<std::string> out;
    std::string current;
    for (char c : joined) {
        if (c == ',') {
            out.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    if (!current.empty()) out.push_back(current);
    return out;
}

std::string shape_text(const Shape& shape) {
    std::string out;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out;
}

}  // namespace

std::string model_config_text(const ModelConfig& cfg) {
    std::ostringstream out;
    out << "feature_dim=" << cfg.feature_dim << "\n";
    out << "target_seq_len=" << cfg.target_seq_len << "\n";
    out << "d_model=" << cfg.d_model << "\n";
    out << "num_heads=" << cfg.num_heads << "\n";
    out << "num_layers=" << cfg.num_layers << "\n";
    out << "dim_feedforward=" << cfg.dim_feedforward << "\n";
    out << "dropout=" << double_str(cfg.dropout) << "\n";
    out << "num_classes=" << cfg.num_classes << "\n";
    return out.str();
}

ModelConfig parse_model_config_text(const std::string& text) {
    ModelConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("model config: bad line \"" + line + "\"");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "feature_dim") cfg.feature_dim = parse_u64(value);
        else if (key == "target_seq_len") cfg.target_seq_len = parse_u64(value);
        else if (key == "d_model") cfg.d_model = parse_u64(value);
        else if (key == "num_heads") cfg.num_heads = parse_u64(value);
        else if (key == "num_layers") cfg.num_layers = parse_u64(value);
        else if (key == "dim_feedforward") cfg.dim_feedforward = parse_u64(value);
        else if (key == "dropout") cfg.dropout = parse_double(value);
        else if (key == "num_classes") cfg.num_classes = parse_u64(value);
        else throw FormatError("model config: unknown key \"" + key + "\"");
    }
    return cfg;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const std::vector<std::string>& class_names,
                     ParameterSet<float>& params) {
    // Serialize every tensor first so the manifest can carry offsets.
    std::ostringstream blob;
    std::vector<std::pair<std::string, std::size_t>> offsets;
    auto named = params.named();
    for (const auto& p : named) {
        offsets.emplace_back(p.name, static_cast<std::size_t>(blob.tellp()));
        write_container(blob, p.var->value());
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    out << kHeader << "\n";
    out << "[config]\n" << model_config_text(cfg);
    out << "class_names=" << join_names(class_names) << "\n";
    out << "[tensors]\n";
    for (std::size_t i = 0; i < named.size(); ++i)
        out << named[i].name << " " << shape_text(named[i].var->shape()) << " "
            << offsets[i].second << "\n";
    out << "[blob]\n";
    const std::string bytes = blob.str();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());

    std::string line;
    if (!std::getline(in, line) || line != kHeader)
        throw FormatError("checkpoint: bad header in " + path.string());
    if (!std::getline(in, line) || line != "[config]")
        throw FormatError("checkpoint: missing [config] section");

    std::string config_text;
    std::vector<std::string> class_names = class_name_vector();
    while (std::getline(in, line) && line != "[tensors]") {
        if (line.rfind("class_names=", 0) == 0)
            class_names = split_names(line.substr(12));
        else
            config_text += line + "\n";
    }
    ModelConfig cfg = parse_model_config_text(config_text);
    cfg.validate();

    struct Entry {
        std::string name;
        std::size_t offset;
    };
    std::vector<Entry> entries;
    while (std::getline(in, line) && line != "[blob]") {
        if (line.empty()) continue;
        std::istringstream fields(line);
        Entry e;
        std::string shape_field;
        if (!(fields >> e.name >> shape_field >> e.offset))
            throw FormatError("checkpoint: bad tensor line \"" + line + "\"");
        entries.push_back(std::move(e));
    }
    const std::streampos blob_start = in.tellg();

    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.class_names = class_names;
    ckpt.params = init_params<float>(cfg, 0);

    auto named = ckpt.params.named();
    if (entries.size() != named.size())
        throw FormatError("checkpoint: expected " + std::to_string(named.size()) +
                          " tensors, found " + std::to_string(entries.size()));
    for (std::size_t i = 0; i < named.size(); ++i) {
        if (entries[i].name != named[i].name)
            throw FormatError("checkpoint: tensor \"" + entries[i].name +
                              "\" where \"" + named[i].name + "\" was expected");
        in.seekg(blob_start + static_cast<std::streamoff>(entries[i].offset));
        auto tensor = container_to_tensor(read_container(in));
        if (tensor.shape() != named[i].var->shape())
            throw FormatError("checkpoint: tensor \"" + entries[i].name +
                              "\" has shape " + shape_str(tensor.shape()) +
                              ", expected " + shape_str(named[i].var->shape()));
        *named[i].var = Var<float>(std::move(tensor), /*requires_grad=*/true);
    }
    return ckpt;
}

}  // namespace skyfuse
