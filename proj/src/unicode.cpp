#include "emojimodal/unicode.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <charconv>
#include <cstdio>

#include "emojimodal/error.hpp"

namespace emojimodal::unicode {
namespace {

// Returns the number of bytes consumed, 0 on malformed input.
std::size_t decode_one(std::string_view s, std::size_t pos, char32_t& out) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  std::size_t len;
  char32_t cp;
  if (b0 < 0x80) {
    out = b0;
    return 1;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (pos + len > s.size()) return 0;
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t kMinForLength[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMinForLength[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  out = cp;
  return len;
}

}  // namespace

Codepoints decode_utf8(std::string_view text) {
  Codepoints out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t cp;
    const std::size_t n = decode_one(text, pos, cp);
    if (n == 0) throw DataError("invalid UTF-8 at byte offset " + std::to_string(pos));
    out.push_back(cp);
    pos += n;
  }
  return out;
}

bool is_valid_utf8(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t cp;
    const std::size_t n = decode_one(text, pos, cp);
    if (n == 0) return false;
    pos += n;
  }
  return true;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode_utf8(const Codepoints& cps) {
  std::string out;
  out.reserve(cps.size() * 2);
  for (char32_t c : cps) append_utf8(out, c);
  return out;
}

std::string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  const auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  if (normalizer->isNormalized(src, status) && U_SUCCESS(status)) return std::string(text);
  status = U_ZERO_ERROR;
  const icu::UnicodeString normalized = normalizer->normalize(src, status);
  if (U_FAILURE(status)) throw DataError("NFC normalization failed");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

bool is_alnum(char32_t c) { return u_isalnum(static_cast<UChar32>(c)) != 0; }
bool is_digit(char32_t c) { return u_isdigit(static_cast<UChar32>(c)) != 0; }
bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)) != 0; }

bool is_ignorable(char32_t c) {
  const auto type = u_charType(static_cast<UChar32>(c));
  return type == U_FORMAT_CHAR || type == U_CONTROL_CHAR || type == U_NON_SPACING_MARK ||
         type == U_ENCLOSING_MARK || is_variation_selector(c);
}

char32_t to_lower(char32_t c) { return static_cast<char32_t>(u_tolower(static_cast<UChar32>(c))); }

std::string to_hex_sequence(const Codepoints& cps) {
  std::string out;
  char buf[16];
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (i > 0) out.push_back('-');
    std::snprintf(buf, sizeof(buf), "%04X", static_cast<unsigned>(cps[i]));
    out += buf;
  }
  return out;
}

Codepoints parse_hex_sequence(std::string_view hex) {
  Codepoints out;
  std::size_t pos = 0;
  while (pos <= hex.size()) {
    std::size_t end = hex.find_first_of("- ", pos);
    if (end == std::string_view::npos) end = hex.size();
    const std::string_view part = hex.substr(pos, end - pos);
    if (!part.empty()) {
      unsigned value = 0;
      const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value, 16);
      if (ec != std::errc{} || ptr != part.data() + part.size() || value > 0x10FFFF ||
          (value >= 0xD800 && value <= 0xDFFF)) {
        throw DataError("bad codepoint '" + std::string(part) + "'");
      }
      out.push_back(static_cast<char32_t>(value));
    }
    pos = end + 1;
  }
  if (out.empty()) throw DataError("empty codepoint sequence");
  return out;
}

}  // namespace emojimodal::unicode
