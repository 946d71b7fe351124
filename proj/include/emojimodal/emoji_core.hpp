#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "emojimodal/unicode.hpp"

namespace emojimodal {

using ClassIndex = std::uint32_t;

struct EmojiEntry {
  unicode::Codepoints sequence;
  std::string name;
  std::vector<std::string> description_terms;
  ClassIndex class_index = 0;

  std::string utf8() const { return unicode::encode_utf8(sequence); }
};

// The emoji class universe. Class indices are dense, in insertion order.
class EmojiCatalog {
 public:
  EmojiCatalog() = default;

  // Throws DataError on a duplicate sequence, an empty sequence or a name
  // without usable description terms.
  explicit EmojiCatalog(std::vector<EmojiEntry> entries);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const EmojiEntry& operator[](ClassIndex c) const { return entries_.at(c); }
  const std::vector<EmojiEntry>& entries() const { return entries_; }

  std::optional<ClassIndex> find_exact(std::u32string_view sequence) const;
  // Lookup with variation selectors and skin-tone modifiers removed from
  // both the query and the catalog sequences.
  std::optional<ClassIndex> find_base(std::u32string_view sequence) const;
  std::size_t max_sequence_length() const { return max_length_; }

  // Catalog file body: hex<TAB>name<TAB>terms per line.
  void write(std::ostream& out) const;

 private:
  std::vector<EmojiEntry> entries_;
  std::unordered_map<std::u32string, ClassIndex> lookup_;
  std::unordered_map<std::u32string, ClassIndex> base_lookup_;
  std::size_t max_length_ = 0;
};

EmojiCatalog load_catalog(const std::filesystem::path& path);
EmojiCatalog parse_catalog(std::istream& in, const std::string& source);

// Drops variation selectors and skin-tone modifiers.
unicode::Codepoints strip_modifiers(std::u32string_view sequence);

std::optional<ClassIndex> class_of(std::u32string_view sequence, const EmojiCatalog& catalog,
                                   bool modifier_fallback = false);

struct SegmentOptions {
  // Regional indicators are extracted one letter at a time instead of as
  // flag pairs.
  bool letterwise_flags = false;
  // Modified sequences missing from the catalog collapse to their base
  // emoji; joiners between extracted emoji are absorbed.
  bool modifier_fallback = true;
};

struct EmojiMatch {
  ClassIndex class_index;
  std::string source;            // consumed input bytes
  std::size_t input_offset;      // byte offset in the original text
  std::size_t stripped_offset;   // byte offset in stripped_text where it was removed
};

struct Segmentation {
  std::string stripped_text;
  std::vector<EmojiMatch> matches;

  std::vector<ClassIndex> classes() const;
  // Interleaves stripped_text and the matched sources back together.
  std::string reconstruct() const;
};

// Longest-match extraction of catalog emoji. Throws DataError on invalid UTF-8.
Segmentation segment(std::string_view text, const EmojiCatalog& catalog, const SegmentOptions& options = {});

}  // namespace emojimodal
