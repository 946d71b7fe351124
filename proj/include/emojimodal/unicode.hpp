#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace emojimodal::unicode {

using Codepoints = std::u32string;

inline constexpr char32_t kZeroWidthJoiner = 0x200D;
inline constexpr char32_t kTextPresentation = 0xFE0E;
inline constexpr char32_t kEmojiPresentation = 0xFE0F;
inline constexpr char32_t kCombiningKeycap = 0x20E3;

constexpr bool is_skin_tone_modifier(char32_t c) { return c >= 0x1F3FB && c <= 0x1F3FF; }
constexpr bool is_variation_selector(char32_t c) { return c == kTextPresentation || c == kEmojiPresentation; }
constexpr bool is_regional_indicator(char32_t c) { return c >= 0x1F1E6 && c <= 0x1F1FF; }

// Throws DataError on malformed UTF-8 (overlongs, surrogates, truncation).
Codepoints decode_utf8(std::string_view text);
bool is_valid_utf8(std::string_view text);
void append_utf8(std::string& out, char32_t cp);
std::string encode_utf8(const Codepoints& cps);

// Canonical composition (NFC).
std::string nfc(std::string_view text);

// Per-codepoint character classes used by the tokenizer.
bool is_alnum(char32_t c);
bool is_digit(char32_t c);
bool is_space(char32_t c);
// Format and control characters (ZWJ, variation selectors, BOM, ...).
bool is_ignorable(char32_t c);
char32_t to_lower(char32_t c);

// "1F600" / "1F468-200D-1F469" style codepoint lists.
std::string to_hex_sequence(const Codepoints& cps);
Codepoints parse_hex_sequence(std::string_view hex);

}  // namespace emojimodal::unicode
