#include "skyfuse/container.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "skyfuse/errors.hpp"

namespace skyfuse {

namespace {

constexpr char kMagic[4] = {'S', 'K', 'Y', 'F'};

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
    std::reverse(std::begin(bytes), std::end(bytes));
#endif
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw FormatError("container truncated while reading header");
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
    std::reverse(std::begin(bytes), std::end(bytes));
#endif
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

void write_header(std::ostream& out, Dtype dtype, const Shape& shape) {
    out.write(kMagic, 4);
    write_le<std::uint16_t>(out, kContainerVersion);
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(shape.size()));
    for (std::size_t e : shape) write_le<std::uint64_t>(out, e);
}

void write_f32_payload(std::ostream& out, const float* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) write_le<float>(out, data[i]);
}

}  // namespace

void write_container(std::ostream& out, const Tensor<float>& tensor) {
    write_header(out, Dtype::f32, tensor.shape());
    write_f32_payload(out, tensor.data(), tensor.size());
    if (!out) throw IoError("container write failed");
}

void write_container(std::ostream& out, const Shape& shape,
                     const std::vector<std::complex<float>>& values) {
    if (values.size() != shape_numel(shape))
        throw ShapeError("complex payload length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    write_header(out, Dtype::c64, shape);
    write_f32_payload(out, reinterpret_cast<const float*>(values.data()),
                      values.size() * 2);
    if (!out) throw IoError("container write failed");
}

ContainerData read_container(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad container magic (expected SKYF)");
    const auto version = read_le<std::uint16_t>(in);
    if (version != kContainerVersion)
        throw FormatError("unsupported container version " + std::to_string(version));
    const auto dtype = read_le<std::uint8_t>(in);
    if (dtype > 1) throw FormatError("unknown container dtype " + std::to_string(dtype));
    const auto ndim = read_le<std::uint8_t>(in);

    ContainerData data;
    data.dtype = static_cast<Dtype>(dtype);
    data.shape.resize(ndim);
    for (std::size_t i = 0; i < ndim; ++i) {
        data.shape[i] = read_le<std::uint64_t>(in);
        if (data.shape[i] == 0) throw FormatError("zero extent in container shape");
    }

    const std::size_t n = data.numel();
    const std::size_t scalars = data.dtype == Dtype::f32 ? n : 2 * n;
    std::vector<float> raw(scalars);
    for (std::size_t i = 0; i < scalars; ++i) {
        raw[i] = read_le<float>(in);
        if (!in) throw FormatError("container payload truncated");
    }

    if (data.dtype == Dtype::f32) {
        data.f32 = std::move(raw);
    } else {
        data.c64.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            data.c64.emplace_back(raw[2 * i], raw[2 * i + 1]);
    }
    return data;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

}  // namespace

void save_container(const std::filesystem::path& path, const Tensor<float>& tensor) {
    auto out = open_out(path);
    write_container(out, tensor);
}

void save_container(const std::filesystem::path& path, const Shape& shape,
                    const std::vector<std::complex<float>>& values) {
    auto out = open_out(path);
    write_container(out, shape, values);
}

ContainerData load_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    return read_container(in);
}

Tensor<float> container_to_tensor(ContainerData&& data) {
    if (data.dtype != Dtype::f32)
        throw FormatError("expected an f32 container");
    return Tensor<float>(std::move(data.shape), std::move(data.f32));
}

}  // namespace skyfuse
