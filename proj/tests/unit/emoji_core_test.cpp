#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "emojimodal/emoji_core.hpp"
#include "emojimodal/error.hpp"
#include "test_support.hpp"

namespace emojimodal {
namespace {

using testing::catalog_from_tsv;

const char* kSmallCatalog =
    "# comment\n"
    "1F60E\tsunglasses\tcool sunglasses face\n"
    "1F697\tred car\tcar automobile\n"
    "1F3E5\thospital\n";

TEST(UnicodeTest, DecodeEncodeRoundTrip) {
  const std::string text = "a\xC3\xA9\xE4\xB8\xAD\xF0\x9F\x98\x8E";
  const auto cps = unicode::decode_utf8(text);
  ASSERT_EQ(cps.size(), 4u);
  EXPECT_EQ(cps[3], 0x1F60Eu);
  EXPECT_EQ(unicode::encode_utf8(cps), text);
}

TEST(UnicodeTest, RejectsMalformedUtf8) {
  for (const std::string bad : {"\xC0\xAF", "\xED\xA0\x80", "\xF0\x9F\x98", "\xFF", "\xF4\x90\x80\x80"}) {
    EXPECT_FALSE(unicode::is_valid_utf8(bad));
    EXPECT_THROW(unicode::decode_utf8(bad), DataError);
  }
}

TEST(UnicodeTest, HexSequences) {
  const unicode::Codepoints family = {0x1F468, 0x200D, 0x1F469};
  EXPECT_EQ(unicode::to_hex_sequence(family), "1F468-200D-1F469");
  EXPECT_EQ(unicode::parse_hex_sequence("1F468-200D-1F469"), family);
  EXPECT_EQ(unicode::parse_hex_sequence("1F468 200D 1F469"), family);
  EXPECT_THROW(unicode::parse_hex_sequence("D800"), DataError);
  EXPECT_THROW(unicode::parse_hex_sequence("zz"), DataError);
  EXPECT_THROW(unicode::parse_hex_sequence(""), DataError);
}

TEST(UnicodeTest, NfcComposes) {
  EXPECT_EQ(unicode::nfc("e\xCC\x81"), "\xC3\xA9");
}

TEST(CatalogTest, LoadsEntriesInFileOrder) {
  const auto catalog = catalog_from_tsv(kSmallCatalog);
  ASSERT_EQ(catalog->size(), 3u);
  for (ClassIndex c = 0; c < 3; ++c) {
    EXPECT_EQ((*catalog)[c].class_index, c);
    EXPECT_EQ(catalog->find_exact((*catalog)[c].sequence), c);
  }
  EXPECT_EQ((*catalog)[0].description_terms, (std::vector<std::string>{"cool", "sunglasses", "face"}));
  EXPECT_EQ((*catalog)[2].description_terms, (std::vector<std::string>{"hospital"}));
}

TEST(CatalogTest, DuplicateSequenceNamesIt) {
  try {
    catalog_from_tsv("1F600\tgrin\n1F60E\tcool\n1F600\tgrin again\n");
    FAIL() << "expected a duplicate error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("1F600"), std::string::npos);
  }
}

TEST(CatalogTest, EmptyFileIsAnError) {
  EXPECT_THROW(catalog_from_tsv(""), DataError);
  EXPECT_THROW(catalog_from_tsv("# only a comment\n"), DataError);
}

TEST(CatalogTest, MalformedLineReportsLine) {
  try {
    catalog_from_tsv("1F600\tgrin\nnot-hex\tbad\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(catalog_from_tsv("1F600\n"), ParseError);
}

TEST(CatalogTest, WriteRoundTrips) {
  const auto catalog = catalog_from_tsv(kSmallCatalog);
  std::ostringstream out;
  catalog->write(out);
  const auto again = catalog_from_tsv(out.str());
  ASSERT_EQ(again->size(), catalog->size());
  for (ClassIndex c = 0; c < catalog->size(); ++c) {
    EXPECT_EQ((*again)[c].sequence, (*catalog)[c].sequence);
    EXPECT_EQ((*again)[c].name, (*catalog)[c].name);
    EXPECT_EQ((*again)[c].description_terms, (*catalog)[c].description_terms);
  }
}

TEST(ClassOfTest, KnownUnknownAndFallback) {
  const auto catalog = catalog_from_tsv("1F44D\tthumbs up\n1F60E\tsunglasses\n");
  EXPECT_EQ(class_of(U"\U0001F60E", *catalog), 1u);
  EXPECT_EQ(class_of(U"\U0001F984", *catalog), std::nullopt);
  const std::u32string toned = U"\U0001F44D\U0001F3FD";
  EXPECT_EQ(class_of(toned, *catalog), std::nullopt);
  EXPECT_EQ(class_of(toned, *catalog, true), 0u);
}

TEST(ClassOfTest, ExactVariantBeatsBaseFallback) {
  const auto catalog = catalog_from_tsv("1F44D-1F3FD\tthumbs medium\n1F44D\tthumbs up\n");
  EXPECT_EQ(class_of(U"\U0001F44D\U0001F3FD", *catalog, true), 0u);
  EXPECT_EQ(class_of(U"\U0001F44D\U0001F3FF", *catalog, true), 1u);
}

TEST(SegmentTest, AwesomeDay) {
  const auto catalog = catalog_from_tsv(kSmallCatalog);
  const auto seg = segment("awesome day \xF0\x9F\x98\x8E", *catalog);
  EXPECT_EQ(seg.stripped_text, "awesome day ");
  EXPECT_EQ(seg.classes(), (std::vector<ClassIndex>{0}));
}

TEST(SegmentTest, EmptyInput) {
  const auto catalog = catalog_from_tsv(kSmallCatalog);
  const auto seg = segment("", *catalog);
  EXPECT_EQ(seg.stripped_text, "");
  EXPECT_TRUE(seg.matches.empty());
}

TEST(SegmentTest, UnknownPictographStaysInText) {
  const auto catalog = catalog_from_tsv(kSmallCatalog);
  const auto seg = segment("\xF0\x9F\xA6\x84 ok", *catalog);
  EXPECT_EQ(seg.stripped_text, "\xF0\x9F\xA6\x84 ok");
  EXPECT_TRUE(seg.matches.empty());
}

TEST(SegmentTest, InvalidUtf8Throws) {
  const auto catalog = catalog_from_tsv(kSmallCatalog);
  EXPECT_THROW(segment("bad \xFF", *catalog), DataError);
}

TEST(SegmentTest, OffsetsLocateMatches) {
  const auto catalog = catalog_from_tsv(kSmallCatalog);
  const std::string text = "in \xF0\x9F\x9A\x97 going to \xF0\x9F\x8F\xA5";
  const auto seg = segment(text, *catalog);
  ASSERT_EQ(seg.matches.size(), 2u);
  EXPECT_EQ(seg.matches[0].input_offset, 3u);
  EXPECT_EQ(text.substr(seg.matches[1].input_offset, 4), seg.matches[1].source);
  EXPECT_EQ(seg.stripped_text, "in  going to ");
  EXPECT_EQ(seg.reconstruct(), text);
}

TEST(SegmentTest, LongestMatchPrefersZwjSequence) {
  const auto catalog = testing::catalog_from_emoji_test(testing::data_path("emoji-test-fixture.txt"));
  const std::string family = testing::from_hex_words("1F468 200D 1F469 200D 1F467");
  const auto seg = segment(family, *catalog);
  ASSERT_EQ(seg.matches.size(), 1u);
  EXPECT_EQ((*catalog)[seg.matches[0].class_index].name, "family: man, woman, girl");
}

TEST(SegmentTest, LetterwiseFlags) {
  const auto catalog = catalog_from_tsv(
      "1F1F5\tregional indicator p\n1F1F9\tregional indicator t\n1F1F5-1F1F9\tflag portugal\n");
  const std::string pt = testing::from_hex_words("1F1F5 1F1F9");
  EXPECT_EQ(segment(pt, *catalog).classes(), (std::vector<ClassIndex>{2}));
  SegmentOptions letterwise;
  letterwise.letterwise_flags = true;
  EXPECT_EQ(segment(pt, *catalog, letterwise).classes(), (std::vector<ClassIndex>{0, 1}));
}

TEST(SegmentTest, NoFallbackLeavesModifiedSequence) {
  const auto catalog = catalog_from_tsv("1F44D\tthumbs up\n");
  SegmentOptions strict;
  strict.modifier_fallback = false;
  const std::string toned = testing::from_hex_words("1F44D 1F3FD");
  const auto seg = segment(toned, *catalog, strict);
  EXPECT_EQ(seg.classes(), (std::vector<ClassIndex>{0}));
  EXPECT_EQ(seg.stripped_text, testing::from_hex_words("1F3FD"));
  const auto fallback = segment(toned, *catalog);
  EXPECT_EQ(fallback.stripped_text, "");
  EXPECT_EQ(fallback.matches[0].source, toned);
}

TEST(SegmentTest, FixtureFileAgreement) {
  const auto catalog = testing::catalog_from_emoji_test(testing::data_path("emoji-test-fixture.txt"));
  const auto cases = testing::load_segment_cases(testing::data_path("segment-cases.txt"));
  ASSERT_GE(cases.size(), 20u);
  for (const auto& c : cases) {
    SCOPED_TRACE("segment-cases.txt line " + std::to_string(c.line));
    const auto seg = segment(c.input, *catalog);
    std::vector<std::string> names;
    for (ClassIndex k : seg.classes()) names.push_back((*catalog)[k].name);
    EXPECT_EQ(names, c.names);
    EXPECT_EQ(seg.stripped_text, c.stripped);
    EXPECT_EQ(seg.reconstruct(), c.input);
  }
}

TEST(SegmentPropertyTest, PartitionOnRandomStrings) {
  const auto catalog = testing::catalog_from_emoji_test(testing::data_path("emoji-test-fixture.txt"));
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::string text = testing::random_emoji_text(rng, *catalog, 12);
    for (bool letterwise : {false, true}) {
      for (bool fallback : {false, true}) {
        const auto seg = segment(text, *catalog, {letterwise, fallback});
        ASSERT_EQ(seg.reconstruct(), text);
        std::size_t consumed = seg.stripped_text.size();
        for (const auto& m : seg.matches) {
          ASSERT_EQ(text.compare(m.input_offset, m.source.size(), m.source), 0);
          consumed += m.source.size();
        }
        ASSERT_EQ(consumed, text.size());
      }
    }
  }
}

TEST(SegmentPropertyTest, Deterministic) {
  const auto catalog = testing::catalog_from_emoji_test(testing::data_path("emoji-test-fixture.txt"));
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::string text = testing::random_emoji_text(rng, *catalog, 10);
    const auto a = segment(text, *catalog);
    const auto b = segment(text, *catalog);
    EXPECT_EQ(a.stripped_text, b.stripped_text);
    EXPECT_EQ(a.classes(), b.classes());
  }
}

// Removing an emoji can make its neighbours adjacent (two lone regional
// indicators, a digit and a keycap mark). Any emoji found in the stripped
// text must straddle such a removal point.
TEST(SegmentPropertyTest, ResegmentingStrippedTextOnlyFindsJunctions) {
  const auto catalog = testing::catalog_from_emoji_test(testing::data_path("emoji-test-fixture.txt"));
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::string text = testing::random_emoji_text(rng, *catalog, 12);
    const auto first = segment(text, *catalog);
    const auto second = segment(first.stripped_text, *catalog);
    for (const auto& m : second.matches) {
      const std::size_t begin = m.input_offset;
      const std::size_t end = begin + m.source.size();
      const bool straddles = std::any_of(first.matches.begin(), first.matches.end(), [&](const EmojiMatch& f) {
        return f.stripped_offset > begin && f.stripped_offset < end;
      });
      ASSERT_TRUE(straddles) << "trial " << trial;
    }
  }
}

TEST(SegmentPropertyTest, IdempotentWithoutJoinableLeftovers) {
  const auto catalog = testing::catalog_from_emoji_test(testing::data_path("emoji-test-fixture.txt"));
  std::mt19937_64 rng(29);
  int checked = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    const std::string text = testing::random_emoji_text(rng, *catalog, 12);
    const auto cps = unicode::decode_utf8(text);
    const bool joinable = std::any_of(cps.begin(), cps.end(), [](char32_t c) {
      return unicode::is_regional_indicator(c) || c == unicode::kCombiningKeycap;
    });
    if (joinable) continue;
    ++checked;
    const auto first = segment(text, *catalog);
    EXPECT_TRUE(segment(first.stripped_text, *catalog).matches.empty()) << "trial " << trial;
  }
  EXPECT_GT(checked, 500);
}

}  // namespace
}  // namespace emojimodal
