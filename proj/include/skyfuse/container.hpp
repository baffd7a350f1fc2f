#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "skyfuse/tensor.hpp"

namespace skyfuse {

/// Binary tensor container ("SKYF"). Layout, all little-endian:
///   magic "SKYF" | version u16 | dtype u8 | ndim u8 | shape u64[ndim] | payload
/// dtype 0 = f32, dtype 1 = complex64 stored as interleaved f32 pairs.
/// Round-trips are bit-exact.
enum class Dtype : std::uint8_t { f32 = 0, c64 = 1 };

inline constexpr std::uint16_t kContainerVersion = 1;

struct ContainerData {
    Dtype dtype = Dtype::f32;
    Shape shape;
    std::vector<float> f32;                  // filled when dtype == f32
    std::vector<std::complex<float>> c64;    // filled when dtype == c64

    std::size_t numel() const { return shape_numel(shape); }
};

void write_container(std::ostream& out, const Tensor<float>& tensor);
void write_container(std::ostream& out, const Shape& shape,
                     const std::vector<std::complex<float>>& values);
ContainerData read_container(std::istream& in);

void save_container(const std::filesystem::path& path, const Tensor<float>& tensor);
void save_container(const std::filesystem::path& path, const Shape& shape,
                    const std::vector<std::complex<float>>& values);
ContainerData load_container(const std::filesystem::path& path);

/// Moves an f32 container payload into a Tensor; throws FormatError on c64.
Tensor<float> container_to_tensor(ContainerData&& data);

}  // namespace skyfuse
