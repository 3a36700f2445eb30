#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mva/tensor.h"

namespace mva {

/// Malformed file content (bad magic, truncated payload, invalid field).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// MVTN record:
//   "MVTN" | u16 version=1 | u8 dtype (1=f32, 2=f64) | u8 rank
//   | rank x u64 extents | row-major payload
// All integers and payload elements little-endian.
inline constexpr std::uint16_t kTensorFormatVersion = 1;

void write_tensor(std::ostream& os, const Tensor& tensor);
Tensor read_tensor(std::istream& is);

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void save_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_tensor(const std::filesystem::path& path);

// MVCK checkpoint:
//   "MVCK" | u16 version=1 | u32 count
//   | count x (u16 name length | UTF-8 name | MVTN record)
inline constexpr std::uint16_t kCheckpointFormatVersion = 1;

using NamedTensor = std::pair<std::string, Tensor>;

void write_checkpoint(std::ostream& os, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Reads a whole file; throws IoError.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace mva
