#include "emojimodal/emoji_core.hpp"

namespace emojimodal {
namespace {

std::size_t utf8_length(char32_t c) {
  if (c < 0x80) return 1;
  if (c < 0x800) return 2;
  if (c < 0x10000) return 3;
  return 4;
}

struct Candidate {
  std::size_t length;
  ClassIndex class_index;
};

class Segmenter {
 public:
  Segmenter(const unicode::Codepoints& cps, const EmojiCatalog& catalog, const SegmentOptions& options)
      : cps_(cps), catalog_(catalog), options_(options) {
    const std::size_t longest = catalog.max_sequence_length();
    max_span_ = options.modifier_fallback ? 2 * longest + 2 : longest;
  }

  std::optional<Candidate> match_at(std::size_t i) const {
    const char32_t first = cps_[i];
    // A unit never starts on a modifier, selector or joiner unless the
    // catalog lists it exactly.
    const bool attachable_start = !unicode::is_variation_selector(first) &&
                                  !unicode::is_skin_tone_modifier(first) && first != unicode::kZeroWidthJoiner;
    std::size_t limit = std::min(max_span_, cps_.size() - i);
    if (options_.letterwise_flags && unicode::is_regional_indicator(first)) limit = std::min<std::size_t>(limit, 1);
    const std::u32string_view all(cps_);
    for (std::size_t len = limit; len >= 1; --len) {
      const auto span = all.substr(i, len);
      if (auto c = catalog_.find_exact(span)) return Candidate{len, *c};
      if (options_.modifier_fallback && attachable_start) {
        if (auto c = catalog_.find_base(span)) return Candidate{len, *c};
      }
    }
    return std::nullopt;
  }

 private:
  const unicode::Codepoints& cps_;
  const EmojiCatalog& catalog_;
  const SegmentOptions& options_;
  std::size_t max_span_;
};

}  // namespace

std::vector<ClassIndex> Segmentation::classes() const {
  std::vector<ClassIndex> out;
  out.reserve(matches.size());
  for (const EmojiMatch& m : matches) out.push_back(m.class_index);
  return out;
}

std::string Segmentation::reconstruct() const {
  std::string out;
  std::size_t taken = 0;
  for (const EmojiMatch& m : matches) {
    out.append(stripped_text, taken, m.stripped_offset - taken);
    taken = m.stripped_offset;
    out += m.source;
  }
  out.append(stripped_text, taken, std::string::npos);
  return out;
}

Segmentation segment(std::string_view text, const EmojiCatalog& catalog, const SegmentOptions& options) {
  const unicode::Codepoints cps = unicode::decode_utf8(text);
  Segmentation result;
  result.stripped_text.reserve(text.size());
  if (catalog.empty()) {
    result.stripped_text = std::string(text);
    return result;
  }
  const Segmenter segmenter(cps, catalog, options);

  std::size_t i = 0;
  std::size_t byte = 0;
  while (i < cps.size()) {
    auto candidate = segmenter.match_at(i);
    if (!candidate) {
      const std::size_t n = utf8_length(cps[i]);
      result.stripped_text.append(text.substr(byte, n));
      byte += n;
      ++i;
      continue;
    }
    std::size_t end = i + candidate->length;
    if (options.modifier_fallback) {
      while (end < cps.size() &&
             (unicode::is_variation_selector(cps[end]) || unicode::is_skin_tone_modifier(cps[end]))) {
        ++end;
      }
      // A joiner between two extracted emoji belongs to the first one.
      if (end + 1 < cps.size() && cps[end] == unicode::kZeroWidthJoiner && segmenter.match_at(end + 1)) ++end;
    }
    std::size_t n = 0;
    for (std::size_t k = i; k < end; ++k) n += utf8_length(cps[k]);
    result.matches.push_back(EmojiMatch{candidate->class_index, std::string(text.substr(byte, n)), byte,
                                        result.stripped_text.size()});
    byte += n;
    i = end;
  }
  return result;
}

}  // namespace emojimodal
