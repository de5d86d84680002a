#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mvx/tensor.hpp"

// MVXT tensor container, all integers little-endian:
//   "MVXT" | u16 version (=1) | u8 dtype (0 f32, 1 f64) | u8 rank
//   | rank x u32 dims | row-major payload
namespace mvx::mvxt {

inline constexpr std::uint16_t kVersion = 1;

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

struct Header {
  DType dtype = DType::F32;
  Shape shape;
};

template <typename T>
std::vector<std::uint8_t> encode(const BasicTensor<T>& tensor);

// Decodes into T regardless of the stored dtype. Throws IoError on bad
// magic, unknown version or dtype, or a truncated payload.
template <typename T>
BasicTensor<T> decode(std::span<const std::uint8_t> bytes);

Header decode_header(std::span<const std::uint8_t> bytes);

// Writes through a temporary sibling file and renames it into place.
template <typename T>
void write(const std::filesystem::path& path, const BasicTensor<T>& tensor);

template <typename T>
BasicTensor<T> read(const std::filesystem::path& path);

void write_bytes_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

}  // namespace mvx::mvxt
