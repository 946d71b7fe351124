#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "emojimodal/emoji_core.hpp"
#include "emojimodal/error.hpp"

namespace emojimodal {
namespace {

std::vector<std::string> normalize_terms(std::string_view text) {
  std::vector<std::string> terms;
  std::string current;
  for (char32_t c : unicode::decode_utf8(text)) {
    if (unicode::is_space(c) || c == U',' || c == U';') {
      if (!current.empty()) terms.push_back(std::move(current));
      current.clear();
    } else {
      unicode::append_utf8(current, unicode::to_lower(c));
    }
  }
  if (!current.empty()) terms.push_back(std::move(current));
  return terms;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t tab = line.find('\t', pos);
    fields.push_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return fields;
}

}  // namespace

unicode::Codepoints strip_modifiers(std::u32string_view sequence) {
  unicode::Codepoints out;
  out.reserve(sequence.size());
  for (char32_t c : sequence) {
    if (!unicode::is_variation_selector(c) && !unicode::is_skin_tone_modifier(c)) out.push_back(c);
  }
  return out;
}

EmojiCatalog::EmojiCatalog(std::vector<EmojiEntry> entries) : entries_(std::move(entries)) {
  lookup_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    EmojiEntry& e = entries_[i];
    e.class_index = static_cast<ClassIndex>(i);
    if (e.sequence.empty()) throw DataError("catalog entry " + std::to_string(i) + " has an empty sequence");
    if (e.description_terms.empty()) e.description_terms = normalize_terms(e.name);
    if (e.description_terms.empty()) {
      throw DataError("catalog entry " + unicode::to_hex_sequence(e.sequence) + " has no description terms");
    }
    if (!lookup_.emplace(e.sequence, e.class_index).second) {
      throw DataError("duplicate catalog sequence " + unicode::to_hex_sequence(e.sequence));
    }
    max_length_ = std::max(max_length_, e.sequence.size());
  }
  // Exactly-unmodified sequences claim their base key before any modified
  // variant does.
  for (const EmojiEntry& e : entries_) {
    const auto base = strip_modifiers(e.sequence);
    if (base == e.sequence) base_lookup_.emplace(base, e.class_index);
  }
  for (const EmojiEntry& e : entries_) {
    auto base = strip_modifiers(e.sequence);
    if (!base.empty()) base_lookup_.emplace(std::move(base), e.class_index);
  }
}

std::optional<ClassIndex> EmojiCatalog::find_exact(std::u32string_view sequence) const {
  const auto it = lookup_.find(std::u32string(sequence));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<ClassIndex> EmojiCatalog::find_base(std::u32string_view sequence) const {
  const auto base = strip_modifiers(sequence);
  if (base.empty()) return std::nullopt;
  const auto it = base_lookup_.find(base);
  if (it == base_lookup_.end()) return std::nullopt;
  return it->second;
}

void EmojiCatalog::write(std::ostream& out) const {
  for (const EmojiEntry& e : entries_) {
    out << unicode::to_hex_sequence(e.sequence) << '\t' << e.name << '\t';
    for (std::size_t i = 0; i < e.description_terms.size(); ++i) {
      if (i > 0) out << ' ';
      out << e.description_terms[i];
    }
    out << '\n';
  }
}

EmojiCatalog parse_catalog(std::istream& in, const std::string& source) {
  std::vector<EmojiEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 2 || fields.size() > 3) {
      throw ParseError(source, line_no, "expected 2 or 3 tab-separated fields");
    }
    EmojiEntry entry;
    try {
      entry.sequence = unicode::parse_hex_sequence(fields[0]);
      entry.name = std::string(fields[1]);
      if (entry.name.empty()) throw DataError("empty name");
      if (fields.size() == 3) entry.description_terms = normalize_terms(fields[2]);
    } catch (const ParseError&) {
      throw;
    } catch (const DataError& e) {
      throw ParseError(source, line_no, e.what());
    }
    entries.push_back(std::move(entry));
  }
  if (entries.empty()) throw DataError(source + ": catalog has no entries");
  return EmojiCatalog(std::move(entries));
}

EmojiCatalog load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open catalog " + path.string());
  return parse_catalog(in, path.string());
}

std::optional<ClassIndex> class_of(std::u32string_view sequence, const EmojiCatalog& catalog,
                                   bool modifier_fallback) {
  if (auto exact = catalog.find_exact(sequence)) return exact;
  if (modifier_fallback) return catalog.find_base(sequence);
  return std::nullopt;
}

}  // namespace emojimodal
