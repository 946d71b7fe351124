#include "emojimodal/tokenizer.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "emojimodal/corpus.hpp"
#include "emojimodal/error.hpp"
#include "emojimodal/unicode.hpp"

namespace emojimodal {
namespace {

bool is_word(char32_t c) { return c == U'_' || unicode::is_alnum(c); }
bool is_apostrophe(char32_t c) { return c == U'\'' || c == U'’'; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  const auto cps = unicode::decode_utf8(text);
  std::vector<std::string> tokens;
  std::size_t i = 0;
  // Consumes a word starting at i (apostrophes allowed between letters).
  auto take_word = [&](std::size_t start, std::string& out, bool& all_digits) {
    std::size_t j = start;
    all_digits = true;
    while (j < cps.size()) {
      if (is_word(cps[j])) {
        all_digits = all_digits && unicode::is_digit(cps[j]);
        unicode::append_utf8(out, unicode::to_lower(cps[j]));
        ++j;
      } else if (is_apostrophe(cps[j]) && j > start && j + 1 < cps.size() && is_word(cps[j + 1])) {
        all_digits = false;
        out.push_back('\'');
        ++j;
      } else if (unicode::is_ignorable(cps[j])) {
        ++j;
      } else {
        break;
      }
    }
    return j;
  };

  while (i < cps.size()) {
    const char32_t c = cps[i];
    if (unicode::is_space(c) || unicode::is_ignorable(c)) {
      ++i;
      continue;
    }
    if ((c == U'@' || c == U'#') && i + 1 < cps.size() && is_word(cps[i + 1])) {
      std::string word;
      bool digits;
      i = take_word(i + 1, word, digits);
      tokens.push_back(c == U'@' ? std::string(kUserToken) : "#" + word);
      continue;
    }
    if (is_word(c)) {
      std::string word;
      bool digits;
      i = take_word(i, word, digits);
      tokens.push_back(digits ? std::string(kNumberToken) : std::move(word));
      continue;
    }
    std::string symbol;
    unicode::append_utf8(symbol, c);
    tokens.push_back(std::move(symbol));
    ++i;
  }
  return tokens;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  id_to_token_ = {std::string(kPadToken), std::string(kUnknownToken), std::string(kUserToken),
                  std::string(kNumberToken)};
  for (const auto& t : tokens) id_to_token_.push_back(t);
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    if (!token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i)).second) {
      throw DataError("vocabulary token repeated: " + id_to_token_[i]);
    }
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnknown : it->second;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text, std::size_t max_length) const {
  std::vector<TokenId> ids;
  for (const auto& token : tokenize(text)) {
    if (ids.size() >= max_length) break;
    ids.push_back(id(token));
  }
  if (ids.empty()) ids.push_back(kPad);
  return ids;
}

Vocabulary build_vocab(const Corpus& corpus, std::size_t min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be at least 1");
  if (corpus.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const Document& doc : corpus.documents()) {
    for (auto& token : tokenize(doc.stripped_text)) ++counts[std::move(token)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, n] : counts) {
    if (n < min_count) continue;
    if (token == kPadToken || token == kUnknownToken || token == kUserToken || token == kNumberToken) continue;
    kept.emplace_back(token, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [token, n] : kept) tokens.push_back(std::move(token));
  return Vocabulary(tokens);
}

}  // namespace emojimodal
