#include "mvx/mvxt.hpp"

#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <thread>

#include "mvx/error.hpp"

namespace mvx::mvxt {
namespace {

constexpr std::uint8_t kMagic[4] = {0x4D, 0x56, 0x58, 0x54};

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename U>
U get_le(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + sizeof(U) > bytes.size()) throw IoError("MVXT: truncated file");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[pos + i]) << (8 * i);
  pos += sizeof(U);
  return value;
}

Header parse_header(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError("MVXT: bad magic");
  }
  pos = 4;
  const auto version = get_le<std::uint16_t>(bytes, pos);
  if (version != kVersion) throw IoError("MVXT: unsupported version " + std::to_string(version));
  const auto dtype = get_le<std::uint8_t>(bytes, pos);
  if (dtype > 1) throw IoError("MVXT: unknown dtype " + std::to_string(dtype));
  const auto rank = get_le<std::uint8_t>(bytes, pos);
  Header h;
  h.dtype = static_cast<DType>(dtype);
  for (std::uint8_t i = 0; i < rank; ++i) h.shape.push_back(get_le<std::uint32_t>(bytes, pos));
  return h;
}

}  // namespace

template <typename T>
std::vector<std::uint8_t> encode(const BasicTensor<T>& tensor) {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  if (tensor.rank() > 255) throw IoError("MVXT: rank exceeds 255");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_le<std::uint16_t>(out, kVersion);
  out.push_back(std::is_same_v<T, float> ? 0 : 1);
  out.push_back(static_cast<std::uint8_t>(tensor.rank()));
  for (auto d : tensor.shape()) {
    if (d > 0xFFFFFFFFull) throw IoError("MVXT: dimension exceeds u32");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  using Bits = std::conditional_t<std::is_same_v<T, float>, std::uint32_t, std::uint64_t>;
  out.reserve(out.size() + tensor.size() * sizeof(T));
  for (T v : tensor.data()) put_le<Bits>(out, std::bit_cast<Bits>(v));
  return out;
}

Header decode_header(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  return parse_header(bytes, pos);
}

template <typename T>
BasicTensor<T> decode(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  const Header h = parse_header(bytes, pos);
  const std::size_t n = shape_size(h.shape);
  const std::size_t width = h.dtype == DType::F32 ? 4 : 8;
  if (bytes.size() - pos != n * width) {
    throw IoError("MVXT: payload size " + std::to_string(bytes.size() - pos) +
                  " does not match shape " + shape_str(h.shape));
  }
  std::vector<T> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (h.dtype == DType::F32) {
      data[i] = static_cast<T>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos)));
    } else {
      data[i] = static_cast<T>(std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos)));
    }
  }
  return BasicTensor<T>(h.shape, std::move(data));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  static std::atomic<std::uint64_t> counter{0};
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(tid) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename into " + path.string() + ": " + ec.message());
  }
}

template <typename T>
void write(const std::filesystem::path& path, const BasicTensor<T>& tensor) {
  const auto bytes = encode(tensor);
  write_bytes_atomic(path, bytes);
}

template <typename T>
BasicTensor<T> read(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return decode<T>(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

template std::vector<std::uint8_t> encode(const BasicTensor<float>&);
template std::vector<std::uint8_t> encode(const BasicTensor<double>&);
template BasicTensor<float> decode(std::span<const std::uint8_t>);
template BasicTensor<double> decode(std::span<const std::uint8_t>);
template void write(const std::filesystem::path&, const BasicTensor<float>&);
template void write(const std::filesystem::path&, const BasicTensor<double>&);
template BasicTensor<float> read(const std::filesystem::path&);
template BasicTensor<double> read(const std::filesystem::path&);

}  // namespace mvx::mvxt
