#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace emojimodal {

// Little-endian framing helpers shared by the corpus, checkpoint and index
// file formats.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void magic(std::string_view tag);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);
  void f64s(std::span<const double> values);

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  // Throws DataError if the next bytes are not `tag`.
  void expect_magic(std::string_view tag);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  void f64s(std::span<double> out);

 private:
  void read(char* dst, std::size_t n);

  std::istream& in_;
  std::string source_;
};

}  // namespace emojimodal
