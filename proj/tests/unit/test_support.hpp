#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "emojimodal/emoji_core.hpp"
#include "emojimodal/unicode.hpp"

namespace emojimodal::testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(EMOJIMODAL_TEST_DATA) / name;
}

inline std::shared_ptr<const EmojiCatalog> catalog_from_tsv(const std::string& tsv) {
  std::istringstream in(tsv);
  return std::make_shared<const EmojiCatalog>(parse_catalog(in, "inline"));
}

// Fully-qualified rows of an emoji-test style file, in file order.
inline std::shared_ptr<const EmojiCatalog> catalog_from_emoji_test(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<EmojiEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto semi = line.find(';');
    const auto hash = line.find('#', semi);
    std::string status = line.substr(semi + 1, hash - semi - 1);
    if (status.find("fully-qualified") == std::string::npos) continue;
    std::istringstream cps(line.substr(0, semi));
    EmojiEntry e;
    std::string hex;
    while (cps >> hex) e.sequence.push_back(static_cast<char32_t>(std::stoul(hex, nullptr, 16)));
    // "# <emoji> E<version> <name>"
    std::istringstream tail(line.substr(hash + 1));
    std::string glyph, version;
    tail >> glyph >> version;
    std::getline(tail >> std::ws, e.name);
    entries.push_back(std::move(e));
  }
  return std::make_shared<const EmojiCatalog>(std::move(entries));
}

inline std::string from_hex_words(const std::string& words) {
  std::istringstream in(words);
  unicode::Codepoints cps;
  std::string hex;
  while (in >> hex) {
    if (hex == "-") continue;
    cps.push_back(static_cast<char32_t>(std::stoul(hex, nullptr, 16)));
  }
  return unicode::encode_utf8(cps);
}

struct SegmentCase {
  std::string input;
  std::vector<std::string> names;
  std::string stripped;
  std::size_t line;
};

inline std::vector<SegmentCase> load_segment_cases(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<SegmentCase> cases;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(' ');
    const auto e = s.find_last_not_of(' ');
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto a = line.find(';');
    const auto b = line.find(';', a + 1);
    SegmentCase c;
    c.line = line_no;
    c.input = from_hex_words(line.substr(0, a));
    const std::string names = trim(line.substr(a + 1, b - a - 1));
    if (names != "-") {
      std::istringstream parts(names);
      std::string name;
      while (std::getline(parts, name, '|')) c.names.push_back(trim(name));
    }
    c.stripped = from_hex_words(line.substr(b + 1));
    cases.push_back(std::move(c));
  }
  return cases;
}

// Random strings mixing ASCII, joiners, selectors, modifiers, regional
// indicators, pictographs and catalog sequences.
inline std::string random_emoji_text(std::mt19937_64& rng, const EmojiCatalog& catalog, std::size_t max_units) {
  static constexpr char32_t kPool[] = {U'a', U'Z', U' ', U'1', U'#', 0x00E9, 0x200D, 0xFE0F, 0xFE0E, 0x20E3,
                                       0x1F3FB, 0x1F3FF, 0x1F1FA, 0x1F1F8, 0x1F1EF, 0x1F984, 0x2764, 0x1F468,
                                       0x1F469, 0x1F308, 0x1F3F3, 0x4E2D, 0x10FFFF, 0x0301};
  std::uniform_int_distribution<std::size_t> units(0, max_units);
  std::uniform_int_distribution<std::size_t> pick_pool(0, std::size(kPool) - 1);
  std::uniform_int_distribution<std::size_t> pick_entry(0, catalog.size() - 1);
  std::bernoulli_distribution use_entry(0.35);
  unicode::Codepoints cps;
  const std::size_t n = units(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (use_entry(rng)) {
      const auto& seq = catalog[static_cast<ClassIndex>(pick_entry(rng))].sequence;
      cps += seq;
    } else {
      cps.push_back(kPool[pick_pool(rng)]);
    }
  }
  return unicode::encode_utf8(cps);
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("emojimodal-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace emojimodal::testing
