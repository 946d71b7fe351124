#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace emojimodal {

class Corpus;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnknownToken = "<unk>";
inline constexpr std::string_view kUserToken = "<user>";
inline constexpr std::string_view kNumberToken = "<num>";

// Lowercased word tokens. "@name" becomes <user>, an all-digit word becomes
// <num>, "#tag" keeps its hash, other symbols are single-codepoint tokens.
// Format characters (joiners, variation selectors) are dropped.
std::vector<std::string> tokenize(std::string_view text);

using TokenId = std::uint32_t;

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnknown = 1;
  static constexpr TokenId kUser = 2;
  static constexpr TokenId kNumber = 3;

  Vocabulary();
  // Specials are prepended; `tokens` must not repeat or contain them.
  explicit Vocabulary(const std::vector<std::string>& tokens);

  std::size_t size() const { return id_to_token_.size(); }
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const { return id_to_token_.at(id); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  // Token ids of `text`, truncated to max_length; empty text maps to [PAD].
  std::vector<TokenId> encode(std::string_view text, std::size_t max_length) const;

 private:
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Tokens with count >= min_count, ordered by (count desc, token asc).
Vocabulary build_vocab(const Corpus& corpus, std::size_t min_count);

}  // namespace emojimodal
