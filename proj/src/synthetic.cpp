#include "emojimodal/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace emojimodal {
namespace {

// Pictograph blocks used for synthetic classes, skin-tone modifiers excluded.
constexpr std::pair<char32_t, char32_t> kPictographRanges[] = {
    {0x1F300, 0x1F3FA}, {0x1F400, 0x1F4FF}, {0x1F500, 0x1F53D},
    {0x1F600, 0x1F64F}, {0x1F680, 0x1F6C5}, {0x1F910, 0x1F9FF},
};

std::string filler_token(std::size_t k) { return "w" + std::to_string(k); }

}  // namespace

std::string signature_token(std::size_t c) { return "sig" + std::to_string(c); }

EmojiCatalog synthetic_catalog(std::size_t classes) {
  std::vector<EmojiEntry> entries;
  entries.reserve(classes);
  for (const auto& [lo, hi] : kPictographRanges) {
    for (char32_t cp = lo; cp <= hi && entries.size() < classes; ++cp) {
      const std::size_t c = entries.size();
      entries.push_back(EmojiEntry{unicode::Codepoints(1, cp), "emoji" + std::to_string(c), {signature_token(c)}, 0});
    }
  }
  if (entries.size() < classes) throw std::invalid_argument("too many synthetic classes requested");
  return EmojiCatalog(std::move(entries));
}

SyntheticData generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  const std::size_t C = config.classes;
  if (C < 2) throw std::invalid_argument("synthetic corpus needs at least 2 classes");
  if (config.docs < C) throw std::invalid_argument("synthetic corpus needs at least one document per class");
  if (config.min_filler_tokens > config.max_filler_tokens || config.filler_vocab == 0) {
    throw std::invalid_argument("bad filler configuration");
  }
  if (config.strength < 0.0 || config.strength > 1.0) throw std::invalid_argument("strength must be in [0,1]");

  auto catalog = std::make_shared<const EmojiCatalog>(synthetic_catalog(C));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_class(0, C - 1);
  std::uniform_int_distribution<std::size_t> pick_filler(0, config.filler_vocab - 1);
  std::uniform_int_distribution<std::size_t> pick_length(config.min_filler_tokens, config.max_filler_tokens);
  std::bernoulli_distribution own_signature(config.strength);
  std::bernoulli_distribution second_label(config.multi_label_rate);
  std::normal_distribution<double> noise(0.0, config.image_noise);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Class-aligned image directions: axis-aligned when the width allows it.
  std::vector<std::vector<double>> directions;
  if (config.image_dim > 0 && config.image_dim < C) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t c = 0; c < C; ++c) {
      std::vector<double> d(config.image_dim);
      for (double& v : d) v = gauss(rng);
      const double norm = std::sqrt(std::inner_product(d.begin(), d.end(), d.begin(), 0.0));
      for (double& v : d) v /= norm;
      directions.push_back(std::move(d));
    }
  }

  std::vector<ClassIndex> primary(config.docs);
  for (std::size_t i = 0; i < config.docs; ++i) primary[i] = static_cast<ClassIndex>(i % C);
  std::shuffle(primary.begin(), primary.end(), rng);

  SyntheticData out{catalog, {}, Corpus(catalog, {}), {}, {}, {}};
  GroundTruth& truth = out.truth;
  for (std::size_t c = 0; c < C; ++c) truth.signature_tokens.push_back(signature_token(c));
  truth.class_counts.assign(C, 0);

  std::unordered_set<std::string> seen_texts;
  const int width = static_cast<int>(std::to_string(config.docs).size());
  for (std::size_t i = 0; i < config.docs; ++i) {
    const ClassIndex c = primary[i];
    std::vector<ClassIndex> labels{c};
    if (second_label(rng)) {
      ClassIndex d = static_cast<ClassIndex>(pick_class(rng));
      while (d == c) d = static_cast<ClassIndex>(pick_class(rng));
      labels.push_back(d);
    }
    long signature = -1;
    if (config.text_classes.contains(c)) {
      signature = static_cast<long>(own_signature(rng) ? c : pick_class(rng));
    }

    std::string text;
    std::vector<ClassIndex> planted;
    do {
      std::vector<std::string> tokens;
      const std::size_t n = pick_length(rng);
      for (std::size_t k = 0; k < n; ++k) tokens.push_back(filler_token(pick_filler(rng)));
      if (signature >= 0) {
        std::uniform_int_distribution<std::size_t> pos(0, tokens.size());
        tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos(rng)),
                      signature_token(static_cast<std::size_t>(signature)));
      }
      std::vector<std::pair<std::size_t, ClassIndex>> placements;
      for (ClassIndex l : labels) {
        std::uniform_int_distribution<std::size_t> pos(0, tokens.size());
        const std::size_t p = pos(rng);
        tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(p), (*catalog)[l].utf8());
        for (auto& [q, cls] : placements) {
          if (q >= p) ++q;
        }
        placements.emplace_back(p, l);
      }
      std::sort(placements.begin(), placements.end());
      planted.clear();
      for (const auto& [p, l] : placements) planted.push_back(l);
      text.clear();
      for (std::size_t k = 0; k < tokens.size(); ++k) {
        if (k > 0) text.push_back(' ');
        text += tokens[k];
      }
    } while (!seen_texts.insert(text).second);

    RawRecord rec;
    char id[32];
    std::snprintf(id, sizeof(id), "doc%0*zu", width, i);
    rec.id = id;
    rec.text = std::move(text);
    if (config.image_dim > 0) {
      std::vector<double> f(config.image_dim);
      for (double& v : f) v = noise(rng);
      if (config.image_classes.contains(c)) {
        if (directions.empty()) {
          f[c] += 1.0;
        } else {
          for (std::size_t k = 0; k < f.size(); ++k) f[k] += directions[c][k];
        }
      }
      rec.image_features = std::move(f);
    }
    if (config.concepts_per_doc > 0) {
      std::vector<std::pair<std::string, double>> concepts;
      std::size_t k = 0;
      if (config.image_classes.contains(c)) {
        concepts.emplace_back(signature_token(c), 0.6 + 0.4 * unit(rng));
        ++k;
      }
      for (; k < config.concepts_per_doc; ++k) concepts.emplace_back(filler_token(pick_filler(rng)), 0.5 * unit(rng));
      std::stable_sort(concepts.begin(), concepts.end(),
                       [](const auto& a, const auto& b) { return a.second > b.second; });
      out.concepts.push_back(std::move(concepts));
    }

    for (ClassIndex l : labels) ++truth.class_counts[l];
    truth.primary_class.push_back(c);
    truth.planted.push_back(std::move(planted));
    truth.planted_signature.push_back(signature);
    out.records.push_back(std::move(rec));
  }

  if (config.embedding_dim > 0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto add = [&](std::string token) {
      std::vector<double> v(config.embedding_dim);
      for (double& x : v) x = gauss(rng);
      out.embeddings.emplace_back(std::move(token), std::move(v));
    };
    for (std::size_t k = 0; k < config.filler_vocab; ++k) add(filler_token(k));
    for (std::size_t c = 0; c < C; ++c) add(signature_token(c));
  }

  out.corpus = ingest_records(out.records, catalog);
  return out;
}

}  // namespace emojimodal
