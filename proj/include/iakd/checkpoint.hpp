#pragma once

// Named-tensor container shared by network checkpoints and dataset dumps.
//
// Layout (little-endian):
//   "IAKD" | u32 version = 1 | u32 entry count
//   per entry: u16 name length | UTF-8 name | u8 ndim | ndim x u32 dims | f32 data
//
// Values are stored as 32-bit floats; a round trip reproduces each double
// only to float precision.

#include "iakd/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace iakd {

inline constexpr char kCheckpointMagic[4] = {'I', 'A', 'K', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

std::vector<std::uint8_t> encode_container(const std::vector<NamedTensor>& entries);
// Throws CheckpointError on bad magic, version, truncation or trailing bytes.
std::vector<NamedTensor> decode_container(const std::vector<std::uint8_t>& bytes);

void write_container(const std::filesystem::path& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_container(const std::filesystem::path& path);

NamedTensor to_named(const std::string& name, const Tensor& t);

} // namespace iakd
