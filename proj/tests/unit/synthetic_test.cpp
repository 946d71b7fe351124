#include <gtest/gtest.h>

#include <sstream>

#include "emojimodal/synthetic.hpp"
#include "emojimodal/tokenizer.hpp"

namespace emojimodal {
namespace {

// Predicts the class whose signature token occurs in the text, else class 0.
double signature_lookup_top1(const SyntheticData& data) {
  std::size_t hits = 0;
  for (const Document& doc : data.corpus.documents()) {
    std::size_t predicted = 0;
    for (const auto& token : tokenize(doc.stripped_text)) {
      for (std::size_t c = 0; c < data.truth.signature_tokens.size(); ++c) {
        if (token == data.truth.signature_tokens[c]) predicted = c;
      }
    }
    hits += std::binary_search(doc.labels.begin(), doc.labels.end(), static_cast<ClassIndex>(predicted)) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(data.corpus.size());
}

std::string serialize(const SyntheticData& data) {
  std::ostringstream out;
  write_records(out, data.records);
  save_corpus(data.corpus, out);
  data.catalog->write(out);
  return out.str();
}

TEST(SyntheticTest, SameSeedIsByteIdentical) {
  SynthConfig config;
  config.classes = 12;
  config.docs = 400;
  config.image_dim = 16;
  config.multi_label_rate = 0.2;
  config.embedding_dim = 4;
  config.concepts_per_doc = 3;
  const auto a = generate_synthetic(config, 21);
  const auto b = generate_synthetic(config, 21);
  EXPECT_EQ(serialize(a), serialize(b));
  EXPECT_EQ(a.embeddings, b.embeddings);
  EXPECT_EQ(a.concepts, b.concepts);
  EXPECT_NE(serialize(a), serialize(generate_synthetic(config, 22)));
}

TEST(SyntheticTest, ClassCountsMatchGroundTruth) {
  SynthConfig config;
  config.classes = 20;
  config.docs = 1000;
  config.multi_label_rate = 0.3;
  const auto data = generate_synthetic(config, 3);
  ASSERT_EQ(data.corpus.size(), 1000u);
  EXPECT_EQ(data.corpus.class_counts(), data.truth.class_counts);
  for (std::size_t i = 0; i < data.corpus.size(); ++i) {
    EXPECT_EQ(data.corpus[i].label_multiset, data.truth.planted[i]);
  }
}

TEST(SyntheticTest, StrengthOneIsSeparableByUnigrams) {
  SynthConfig config;
  config.classes = 30;
  config.docs = 3000;
  config.strength = 1.0;
  EXPECT_DOUBLE_EQ(signature_lookup_top1(generate_synthetic(config, 7)), 1.0);
}

TEST(SyntheticTest, StrengthZeroIsIndependent) {
  SynthConfig config;
  config.classes = 30;
  config.docs = 3000;
  config.strength = 0.0;
  const double top1 = signature_lookup_top1(generate_synthetic(config, 7));
  EXPECT_LT(top1, 3.0 / 30);
  EXPECT_GT(top1, 1.0 / 90);
}

TEST(SyntheticTest, TextClassRangeControlsSignatures) {
  SynthConfig config;
  config.classes = 10;
  config.docs = 200;
  config.text_classes = {0, 5};
  const auto data = generate_synthetic(config, 1);
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const ClassIndex c = data.truth.primary_class[i];
    EXPECT_EQ(data.truth.planted_signature[i], c < 5 ? static_cast<long>(c) : -1L);
  }
}

TEST(SyntheticTest, ImageFeaturesAlignWithClass) {
  SynthConfig config;
  config.classes = 8;
  config.docs = 200;
  config.image_dim = 8;
  config.image_noise = 0.05;
  config.image_classes = {0, 4};
  const auto data = generate_synthetic(config, 2);
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& f = *data.records[i].image_features;
    const ClassIndex c = data.truth.primary_class[i];
    const auto argmax = static_cast<ClassIndex>(std::max_element(f.begin(), f.end()) - f.begin());
    if (c < 4) {
      EXPECT_EQ(argmax, c);
    } else {
      EXPECT_LT(*std::max_element(f.begin(), f.end()), 0.5);
    }
  }
}

TEST(SyntheticTest, TextsAreUniqueAndIdsOrdered) {
  SynthConfig config;
  config.classes = 5;
  config.docs = 500;
  config.filler_vocab = 3;
  config.min_filler_tokens = 1;
  config.max_filler_tokens = 3;
  const auto data = generate_synthetic(config, 4);
  EXPECT_EQ(data.corpus.size(), 500u);
  EXPECT_EQ(data.records.front().id, "doc000");
  EXPECT_EQ(data.records.back().id, "doc499");
}

TEST(SyntheticTest, RejectsDegenerateConfigs) {
  SynthConfig config;
  config.classes = 1;
  EXPECT_THROW(generate_synthetic(config, 1), std::invalid_argument);
  config.classes = 10;
  config.docs = 9;
  EXPECT_THROW(generate_synthetic(config, 1), std::invalid_argument);
  config.docs = 10;
  config.strength = 1.5;
  EXPECT_THROW(generate_synthetic(config, 1), std::invalid_argument);
}

TEST(SyntheticTest, CatalogNamesAndTerms) {
  const auto catalog = synthetic_catalog(40);
  EXPECT_EQ(catalog.size(), 40u);
  EXPECT_EQ(catalog[7].name, "emoji7");
  EXPECT_EQ(catalog[7].description_terms, std::vector<std::string>{"sig7"});
  EXPECT_THROW(synthetic_catalog(100000), std::invalid_argument);
}

}  // namespace
}  // namespace emojimodal
