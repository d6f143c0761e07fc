#include "autov/avt.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "autov/error.hpp"

namespace autov {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("AVT1 blob truncated in header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_avt(std::ostream& out, const TokenMatrix& m) {
  if (m.empty()) throw ShapeError("cannot serialize an empty matrix");
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() || m.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw ShapeError("matrix " + m.shape_string() + " exceeds AVT1 limits");
  }
  out.write(kAvtMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (float v : m.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw FormatError("failed writing AVT1 blob");
}

TokenMatrix read_avt(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw FormatError("AVT1 blob truncated before magic");
  if (std::memcmp(magic, kAvtMagic, 4) != 0) throw FormatError("bad AVT1 magic");
  const std::uint32_t rows = get_u32(in);
  const std::uint32_t cols = get_u32(in);
  if (rows == 0 || cols == 0) throw FormatError("AVT1 blob has a zero dimension");
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> raw(count * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw FormatError("AVT1 blob truncated: expected " + std::to_string(count) + " values");
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* b = &raw[i * 4];
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    data[i] = std::bit_cast<float>(bits);
  }
  TokenMatrix m(rows, cols, std::move(data));
  if (!m.all_finite()) throw FormatError("AVT1 blob contains non-finite values");
  return m;
}

void save_avt(const std::filesystem::path& path, const TokenMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PathError("cannot open '" + path.string() + "' for writing");
  write_avt(out, m);
}

TokenMatrix load_avt(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingBlobError("cannot open tensor blob '" + path.string() + "'");
  TokenMatrix m = read_avt(in);
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after AVT1 blob in '" + path.string() + "'");
  return m;
}

}  // namespace autov
