#pragma once

// Versioned binary container for trained weights.
//
// Layout (little-endian):
//   "DRDCKPT\0"          8-byte magic
//   u32 version          currently 1
//   u32 array_count
//   array_count x { u32 name_len, name, u32 rank, u64 dims[rank], f64 values[prod(dims)] }
//   u32 text_count
//   text_count  x { u32 name_len, name, u64 size, bytes[size] }

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "drd/tensor.hpp"

namespace drd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    struct Array {
        Shape shape;
        std::vector<double> values;
        bool operator==(const Array&) const = default;
    };
    std::map<std::string, Array> arrays;
    std::map<std::string, std::string> texts;

    bool operator==(const Checkpoint&) const = default;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Stores params as "<prefix>.<index>".
void store_parameters(Checkpoint& checkpoint, const std::string& prefix, std::span<const Tensor> params);
// Overwrites params in place; shapes must match.
void load_parameters(const Checkpoint& checkpoint, const std::string& prefix, std::span<const Tensor> params);

}  // namespace drd
