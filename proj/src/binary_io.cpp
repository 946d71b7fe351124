#include "emojimodal/binary_io.hpp"

#include <bit>
#include <cstring>

#include "emojimodal/error.hpp"

namespace emojimodal {
namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(buf, sizeof(T));
}

template <typename T>
T get_le(const unsigned char* buf) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(buf[i]) << (8 * i);
  }
  return v;
}

}  // namespace

void BinaryWriter::magic(std::string_view tag) { out_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }

void BinaryWriter::u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
void BinaryWriter::u32(std::uint32_t v) { put_le(out_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(out_, v); }
void BinaryWriter::f64(double v) { put_le(out_, std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryWriter::f64s(std::span<const double> values) {
  for (double v : values) f64(v);
}

void BinaryReader::read(char* dst, std::size_t n) {
  in_.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    throw DataError(source_ + ": unexpected end of file");
  }
}

void BinaryReader::expect_magic(std::string_view tag) {
  std::string got(tag.size(), '\0');
  in_.read(got.data(), static_cast<std::streamsize>(tag.size()));
  if (static_cast<std::size_t>(in_.gcount()) != tag.size() || got != tag) {
    throw DataError(source_ + ": bad magic, expected " + std::string(tag));
  }
}

std::uint8_t BinaryReader::u8() {
  char c;
  read(&c, 1);
  return static_cast<std::uint8_t>(c);
}

std::uint32_t BinaryReader::u32() {
  unsigned char buf[4];
  read(reinterpret_cast<char*>(buf), 4);
  return get_le<std::uint32_t>(buf);
}

std::uint64_t BinaryReader::u64() {
  unsigned char buf[8];
  read(reinterpret_cast<char*>(buf), 8);
  return get_le<std::uint64_t>(buf);
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
  const std::uint32_t n = u32();
  std::string s(n, '\0');
  if (n > 0) read(s.data(), n);
  return s;
}

void BinaryReader::f64s(std::span<double> out) {
  for (double& v : out) v = f64();
}

}  // namespace emojimodal
