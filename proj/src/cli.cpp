#include "emojimodal/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/fmt/fmt.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "emojimodal/corpus.hpp"
#include "emojimodal/error.hpp"
#include "emojimodal/fusion.hpp"
#include "emojimodal/metrics.hpp"
#include "emojimodal/retrieval.hpp"
#include "emojimodal/service.hpp"
#include "emojimodal/synthetic.hpp"
#include "emojimodal/text_model.hpp"
#include "emojimodal/vision_model.hpp"
#include "emojimodal/zeroshot.hpp"

namespace emojimodal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("invalid number '" + text + "' in " + what);
}

std::size_t parse_size(const std::string& text, const std::string& what) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw UsageError("invalid count '" + text + "' in " + what);
  }
  return std::stoul(text);
}

std::vector<std::size_t> parse_topk(const std::string& text) {
  std::vector<std::size_t> ks;
  for (const auto& part : split_on(text, ',')) {
    const std::size_t k = parse_size(part, "--topk");
    if (k == 0) throw UsageError("--topk values must be positive");
    ks.push_back(k);
  }
  if (ks.empty()) throw UsageError("--topk is empty");
  return ks;
}

std::vector<double> parse_grid(const std::string& text) {
  const auto parts = split_on(text, ':');
  if (parts.size() != 3) throw UsageError("--grid must be lo:hi:step");
  const double lo = parse_double(parts[0], "--grid");
  const double hi = parse_double(parts[1], "--grid");
  const double step = parse_double(parts[2], "--grid");
  try {
    return alpha_grid(lo, hi, step);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

ClassRange parse_range(const std::string& text, const std::string& what) {
  if (text.empty()) return {};
  const auto parts = split_on(text, ':');
  if (parts.size() != 2) throw UsageError(what + " must be begin:end");
  ClassRange r{parse_size(parts[0], what), parse_size(parts[1], what)};
  if (r.begin > r.end) throw UsageError(what + " has begin > end");
  return r;
}

SplitRatios parse_ratios(const std::string& text) {
  const auto parts = split_on(text, ':');
  if (parts.size() != 3) throw UsageError("--ratios must be train:validation:test");
  return {parse_double(parts[0], "--ratios"), parse_double(parts[1], "--ratios"), parse_double(parts[2], "--ratios")};
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_text_file(const fs::path& path, const std::string& content) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("write failed for " + path.string());
}

std::shared_ptr<const EmojiCatalog> open_catalog(const std::string& path) {
  return std::make_shared<const EmojiCatalog>(load_catalog(path));
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

// Whitespace-separated numeric matrix, one row per line.
std::vector<std::vector<double>> read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::vector<double> row;
    std::string field;
    while (fields >> field) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != field.size()) throw ParseError(path.string(), line_no, "not a number: '" + field + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path.string(), line_no, "expected " + std::to_string(rows.front().size()) + " columns");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + " is empty");
  return rows;
}

json history_json(const TrainHistory& history) {
  json epochs = json::array();
  for (const auto& e : history.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"validation_msap", e.validation_msap},
                      {"learning_rate", e.learning_rate}});
  }
  return {{"epochs", epochs},
          {"best_epoch", history.best_epoch},
          {"best_validation_msap", history.best_validation_msap},
          {"stopped_early", history.stopped_early}};
}

json train_config_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"lr_decay", c.lr_decay}, {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},       {"patience", c.patience}, {"clip_norm", c.clip_norm},
          {"l2", c.l2},                       {"seed", c.seed},         {"epoch_draws", c.epoch_draws}};
}

std::string history_table(const TrainHistory& history) {
  std::string out = "epoch\ttrain_loss\tvalidation_msap\tlearning_rate\n";
  for (const auto& e : history.epochs) {
    out += fmt::format("{}\t{:.6f}\t{:.6f}\t{:.6g}\n", e.epoch, e.train_loss, e.validation_msap, e.learning_rate);
  }
  out += fmt::format("best_epoch={}\nbest_validation_msap={:.6f}\n", history.best_epoch,
                     history.best_validation_msap);
  return out;
}

std::string report(const EvalBatch& batch, const std::vector<std::size_t>& ks, bool as_json) {
  const auto records = prediction_report(batch, ks);
  return as_json ? format_report_json(records) : format_report_text(records);
}

ZeroShotMode parse_zeroshot_mode(const std::string& mode) {
  if (mode == "text") return ZeroShotMode::kText;
  if (mode == "image") return ZeroShotMode::kImage;
  if (mode == "fused") return ZeroShotMode::kFused;
  throw UsageError("--mode must be text, image or fused");
}

std::atomic<bool> g_stop_requested{false};

extern "C" void handle_stop_signal(int) { g_stop_requested.store(true); }

// Flat key=value lines become --key=value tokens placed right after the
// subcommand, so flags given explicitly come later and win.
std::vector<std::string> apply_config_overlay(const std::vector<std::string>& args, const CLI::App& app) {
  if (args.empty()) return args;
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path) return args;
  const CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[0]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::ifstream in(*path);
  if (!in) throw UsageError("cannot open config file " + *path);
  std::vector<std::string> overlay;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(fmt::format("{}:{}: expected key=value", *path, line_no));
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config") throw UsageError(fmt::format("{}:{}: invalid key", *path, line_no));
    if (sub->get_option_no_throw("--" + key) == nullptr) {
      spdlog::debug("config key '{}' does not apply to {}", key, args[0]);
      continue;
    }
    overlay.push_back("--" + key + "=" + value);
  }
  std::vector<std::string> out{args[0]};
  out.insert(out.end(), overlay.begin(), overlay.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

struct Options {
  std::string config;
  std::uint64_t seed = 1;
  std::string catalog;
  std::string input;
  std::string out;
  std::string out_dir;
  std::string corpus;
  std::string train;
  std::string validation;
  std::string text_model;
  std::string image_model;
  std::string embeddings;
  std::string concepts;
  std::string index;
  std::string scores;
  std::string labels;
  std::string topk = "1,5,10,100";
  std::string grid = "0:1:0.05";
  std::string ratios = "0.8:0.1:0.1";
  std::string mode = "text";
  std::string scorer = "text";
  std::string query;
  std::string combine = "geo";
  std::string host = "127.0.0.1";
  std::string ui;
  std::string text_classes;
  std::string image_classes;
  std::optional<double> alpha;
  std::size_t image_dim = 0;
  std::size_t test_cap = 0;
  std::size_t k = 10;
  int port = 8080;
  bool as_json = false;
  bool letterwise_flags = false;
  bool no_modifier_fallback = false;
  bool image_only = false;
  SynthConfig synth;
  TextModelConfig text;
  TrainConfig train_config;
};

void add_train_options(CLI::App* sub, Options& o) {
  sub->add_option("--lr", o.train_config.learning_rate, "Initial learning rate")->capture_default_str();
  sub->add_option("--lr-decay", o.train_config.lr_decay, "Learning-rate factor after a non-improving epoch")
      ->capture_default_str();
  sub->add_option("--batch-size", o.train_config.batch_size, "Minibatch size")->capture_default_str();
  sub->add_option("--epochs", o.train_config.max_epochs, "Maximum epochs")->capture_default_str();
  sub->add_option("--patience", o.train_config.patience, "Non-improving epochs before stopping")
      ->capture_default_str();
  sub->add_option("--clip-norm", o.train_config.clip_norm, "Gradient clipping norm")->capture_default_str();
  sub->add_option("--epoch-draws", o.train_config.epoch_draws, "Balanced draws per epoch (0 = corpus size)")
      ->capture_default_str();
}

Corpus load_split(const std::string& path, const std::shared_ptr<const EmojiCatalog>& catalog) {
  return load_corpus(fs::path(path), catalog);
}

int cmd_ingest(const Options& o, std::ostream& out) {
  auto catalog = open_catalog(o.catalog);
  IngestOptions options;
  if (o.image_dim > 0) options.image_dim = o.image_dim;
  options.segment.letterwise_flags = o.letterwise_flags;
  options.segment.modifier_fallback = !o.no_modifier_fallback;
  const Corpus corpus = ingest(o.input, catalog, options);
  ensure_parent(o.out);
  save_corpus(corpus, fs::path(o.out));
  std::size_t with_image = 0;
  for (const auto& d : corpus.documents()) with_image += d.has_image() ? 1 : 0;
  out << "documents=" << corpus.size() << "\nclasses=" << corpus.num_classes() << "\nwith_image=" << with_image
      << "\nannotation_sets=" << corpus.annotation_set_counts().size() << "\n";
  return 0;
}

void write_splits(const CorpusSplits& splits, const fs::path& dir, std::ostream& out) {
  fs::create_directories(dir);
  save_corpus(splits.train, dir / "train.emjc");
  save_corpus(splits.validation, dir / "validation.emjc");
  save_corpus(splits.test, dir / "test.emjc");
  out << "train=" << splits.train.size() << "\nvalidation=" << splits.validation.size()
      << "\ntest=" << splits.test.size() << "\n";
}

int cmd_split(const Options& o, std::ostream& out) {
  auto catalog = open_catalog(o.catalog);
  const Corpus corpus = load_split(o.corpus, catalog);
  CorpusSplits splits = split(corpus, parse_ratios(o.ratios), o.seed);
  if (o.image_only) splits = image_subset(splits);
  if (o.test_cap > 0) splits.test = balanced_test_subset(splits.test, o.test_cap, o.seed);
  write_splits(splits, o.out_dir, out);
  return 0;
}

int cmd_synth(Options o, std::ostream& out) {
  o.synth.text_classes = parse_range(o.text_classes, "--text-classes");
  o.synth.image_classes = parse_range(o.image_classes, "--image-classes");
  const SyntheticData data = generate_synthetic(o.synth, o.seed);
  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  {
    std::ostringstream s;
    data.catalog->write(s);
    write_text_file(dir / "catalog.tsv", s.str());
  }
  {
    std::ostringstream s;
    write_records(s, data.records);
    write_text_file(dir / "corpus.jsonl", s.str());
  }
  json truth{{"classes", o.synth.classes},
             {"documents", data.records.size()},
             {"seed", o.seed},
             {"signature_tokens", data.truth.signature_tokens},
             {"primary_class", data.truth.primary_class},
             {"planted_signature", data.truth.planted_signature},
             {"class_counts", data.truth.class_counts}};
  write_text_file(dir / "truth.json", truth.dump(2) + "\n");
  if (!data.embeddings.empty()) {
    std::string text;
    for (const auto& [token, vec] : data.embeddings) {
      text += token;
      for (double v : vec) text += " " + fmt_double(v);
      text += "\n";
    }
    write_text_file(dir / "embeddings.txt", text);
  }
  if (!data.concepts.empty()) {
    std::string text;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      text += data.records[i].id;
      for (const auto& [name, conf] : data.concepts[i]) text += "\t" + name + ":" + fmt_double(conf);
      text += "\n";
    }
    write_text_file(dir / "concepts.tsv", text);
  }
  const CorpusSplits splits = split(data.corpus, parse_ratios(o.ratios), o.seed);
  write_splits(splits, dir, out);
  out << "documents=" << data.corpus.size() << "\nclasses=" << data.corpus.num_classes() << "\n";
  return 0;
}

int cmd_train_text(Options o, std::ostream& out) {
  auto catalog = open_catalog(o.catalog);
  const Corpus train = load_split(o.train, catalog);
  const Corpus validation = load_split(o.validation, catalog);
  o.train_config.seed = o.seed;
  const auto result = train_text_model(train, validation, o.text, o.train_config);
  ensure_parent(o.out);
  save_text_model(result.model, fs::path(o.out));
  json sidecar{{"kind", "text"},
               {"model", {{"embed_dim", o.text.embed_dim},
                          {"hidden_dim", o.text.hidden_dim},
                          {"min_count", o.text.min_count},
                          {"max_tokens", o.text.max_tokens},
                          {"init_scale", o.text.init_scale},
                          {"vocabulary", result.model.vocab.size()}}},
               {"train", train_config_json(o.train_config)},
               {"history", history_json(result.history)}};
  write_text_file(o.out + ".json", sidecar.dump(2) + "\n");
  out << history_table(result.history);
  return 0;
}

int cmd_train_image(Options o, std::ostream& out) {
  auto catalog = open_catalog(o.catalog);
  const Corpus train = load_split(o.train, catalog);
  const Corpus validation = load_split(o.validation, catalog);
  o.train_config.seed = o.seed;
  const auto result = train_image_head(train, validation, o.train_config);
  ensure_parent(o.out);
  save_image_model(result.model, fs::path(o.out));
  json sidecar{{"kind", "image"},
               {"model", {{"image_dim", result.model.image_dim()}, {"classes", result.model.num_classes()}}},
               {"train", train_config_json(o.train_config)},
               {"history", history_json(result.history)}};
  write_text_file(o.out + ".json", sidecar.dump(2) + "\n");
  out << history_table(result.history);
  return 0;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  auto catalog = open_catalog(o.catalog);
  const Corpus validation = load_split(o.corpus, catalog);
  const TextModel text = load_text_model(fs::path(o.text_model));
  const LinearSoftmaxModel image = load_image_model(fs::path(o.image_model));
  const auto grid = parse_grid(o.grid);
  const AlphaSweep sweep = sweep_alpha(validation, text, image, grid);
  out << format_sweep_table(sweep);
  out << fmt::format("best_alpha={:.6f}\nbest_msap={:.6f}\n", sweep.best_alpha, sweep.best_msap);
  return 0;
}

ScoreMatrix supervised_scores(const Options& o, const Corpus& corpus) {
  std::optional<ScoreMatrix> text, image;
  if (!o.text_model.empty()) text = score_texts(load_text_model(fs::path(o.text_model)), corpus);
  if (!o.image_model.empty()) image = score_images(load_image_model(fs::path(o.image_model)), corpus);
  if (text && image) return fuse(*text, *image, FusionWeight(o.alpha.value_or(0.5)));
  if (o.alpha) throw UsageError("--alpha needs both --text-model and --image-model");
  if (text) return *text;
  if (image) return *image;
  throw UsageError("give --text-model and/or --image-model");
}

int cmd_eval(const Options& o, std::ostream& out) {
  auto catalog = open_catalog(o.catalog);
  const Corpus corpus = load_split(o.corpus, catalog);
  const auto ks = parse_topk(o.topk);
  const EvalBatch batch{supervised_scores(o, corpus), relevance_matrix(corpus)};
  out << report(batch, ks, o.as_json);
  return 0;
}

int cmd_zeroshot(const Options& o, std::ostream& out) {
  auto catalog = open_catalog(o.catalog);
  const Corpus corpus = load_split(o.corpus, catalog);
  const auto ks = parse_topk(o.topk);
  const ZeroShotMode mode = parse_zeroshot_mode(o.mode);
  if (mode != ZeroShotMode::kText && o.concepts.empty()) throw UsageError("--mode image/fused needs --concepts");
  const EmbeddingTable table = load_embeddings(o.embeddings);
  const auto prototypes = build_prototypes(*catalog, table);
  std::optional<std::map<std::string, ConceptScores>> concepts;
  if (!o.concepts.empty()) concepts = load_concepts(o.concepts);
  const EvalBatch batch{score_zeroshot(corpus, table, prototypes, concepts ? &*concepts : nullptr, mode),
                        relevance_matrix(corpus)};
  out << report(batch, ks, o.as_json);
  const QueryMap qmap = map_per_query(batch);
  if (o.as_json) {
    out << json{{"metric", "retrieval_map"}, {"value", qmap.map}}.dump() << "\n";
  } else {
    out << fmt::format("retrieval_map={:.6f}\n", qmap.map);
  }
  out << (o.as_json ? json{{"metric", "prototypes"}, {"value", prototypes.size()}}.dump() + "\n"
                    : fmt::format("prototypes={}\n", prototypes.size()));
  return 0;
}

ScoreIndex build_cli_index(const Options& o, const Corpus& corpus) {
  if (o.scorer == "text") {
    if (o.text_model.empty()) throw UsageError("--scorer text needs --text-model");
    return build_index(corpus, TextScorer(load_text_model(fs::path(o.text_model))));
  }
  if (o.scorer == "image") {
    if (o.image_model.empty()) throw UsageError("--scorer image needs --image-model");
    return build_index(corpus, ImageScorer(load_image_model(fs::path(o.image_model))));
  }
  if (o.scorer == "fused") {
    if (o.text_model.empty() || o.image_model.empty()) {
      throw UsageError("--scorer fused needs --text-model and --image-model");
    }
    const TextModel text = load_text_model(fs::path(o.text_model));
    const LinearSoftmaxModel image = load_image_model(fs::path(o.image_model));
    return build_index(corpus, FusedScorer(text, image, FusionWeight(o.alpha.value_or(0.5))));
  }
  if (o.scorer == "zeroshot") {
    if (o.embeddings.empty()) throw UsageError("--scorer zeroshot needs --embeddings");
    const ZeroShotMode mode = parse_zeroshot_mode(o.mode);
    const EmbeddingTable table = load_embeddings(o.embeddings);
    std::optional<std::map<std::string, ConceptScores>> concepts;
    if (!o.concepts.empty()) concepts = load_concepts(o.concepts);
    return build_index(corpus, ZeroShotScorer(table, build_prototypes(corpus.catalog(), table),
                                              concepts ? &*concepts : nullptr, mode));
  }
  throw UsageError("--scorer must be text, image, fused or zeroshot");
}

int cmd_index(const Options& o, std::ostream& out) {
  auto catalog = open_catalog(o.catalog);
  const Corpus corpus = load_split(o.corpus, catalog);
  const ScoreIndex index = build_cli_index(o, corpus);
  ensure_parent(o.out);
  save_index(index, o.out);
  const QueryMap qmap = evaluate_retrieval(index, corpus);
  out << "documents=" << index.size() << "\nscorer=" << index.scorer_tag()
      << fmt::format("\nretrieval_map={:.6f}\nqueries={}\nexcluded_queries={}\n", qmap.map,
                     index.num_classes() - qmap.excluded.size(), qmap.excluded.size());
  return 0;
}

int cmd_search(const Options& o, std::ostream& out) {
  auto catalog = open_catalog(o.catalog);
  const ScoreIndex index = load_index(o.index, catalog);
  if (o.k < 1) throw UsageError("--k must be at least 1");
  Combine combine;
  try {
    combine = parse_combine(o.combine);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const EmojiQuery q = parse_query(o.query, *catalog);
  const auto results = query(index, q, o.k, combine);
  if (o.as_json) {
    for (const auto& r : results) {
      out << json{{"rank", r.rank}, {"doc_id", r.doc_id}, {"score", r.score}, {"snippet", r.snippet},
                  {"has_image", r.has_image}}
                 .dump()
          << "\n";
    }
  } else {
    out << "rank\tdoc_id\tscore\thas_image\tsnippet\n";
    for (const auto& r : results) {
      out << fmt::format("{}\t{}\t{:.6g}\t{}\t{}\n", r.rank, r.doc_id, r.score, r.has_image ? 1 : 0, r.snippet);
    }
  }
  return 0;
}

int cmd_serve(const Options& o, std::ostream& out) {
  auto catalog = open_catalog(o.catalog);
  auto index = std::make_shared<const ScoreIndex>(load_index(o.index, catalog));
  PredictModels models;
  if (!o.text_model.empty()) models.text = std::make_shared<const TextModel>(load_text_model(fs::path(o.text_model)));
  if (!o.image_model.empty()) {
    models.image = std::make_shared<const LinearSoftmaxModel>(load_image_model(fs::path(o.image_model)));
  }
  if (!o.embeddings.empty()) {
    models.embeddings = std::make_shared<const EmbeddingTable>(load_embeddings(o.embeddings));
    models.prototypes = build_prototypes(*catalog, *models.embeddings);
  }
  if (o.alpha) models.default_alpha = FusionWeight(*o.alpha).value();
  std::optional<fs::path> ui;
  if (!o.ui.empty()) ui = o.ui;
  RetrievalService service(index, std::move(models), ui);
  g_stop_requested.store(false);
  auto old_int = std::signal(SIGINT, handle_stop_signal);
  auto old_term = std::signal(SIGTERM, handle_stop_signal);
  const int port = service.start(o.host, o.port);
  out << "listening=" << o.host << ":" << port << std::endl;
  while (!g_stop_requested.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  service.stop();
  std::signal(SIGINT, old_int);
  std::signal(SIGTERM, old_term);
  out << "stopped\n";
  return 0;
}

int cmd_metrics(const Options& o, std::ostream& out) {
  const auto ks = parse_topk(o.topk);
  const auto scores = read_table(o.scores);
  const auto labels = read_table(o.labels);
  if (scores.size() != labels.size() || scores.front().size() != labels.front().size()) {
    throw DataError("scores and labels differ in shape");
  }
  EvalBatch batch{ScoreMatrix(static_cast<Eigen::Index>(scores.size()), static_cast<Eigen::Index>(scores[0].size())),
                  RelevanceMatrix(static_cast<Eigen::Index>(labels.size()),
                                  static_cast<Eigen::Index>(labels[0].size()))};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t j = 0; j < scores[i].size(); ++j) {
      const double y = labels[i][j];
      if (y != 0.0 && y != 1.0) throw ParseError(o.labels, i + 1, "labels must be 0 or 1");
      batch.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = scores[i][j];
      batch.relevance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = y == 1.0 ? 1 : 0;
    }
  }
  out << report(batch, ks, o.as_json);
  return 0;
}

}  // namespace

void configure_logging() {
  auto logger = spdlog::get("emojimodal");
  if (!logger) logger = spdlog::stderr_color_mt("emojimodal");
  spdlog::set_default_logger(logger);
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("EMOJIMODAL_LOG"); env != nullptr && *env != '\0') {
    level = spdlog::level::from_str(env);
  }
  spdlog::set_level(level);
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Emoji as a modality: corpora, prediction models, zero-shot scoring and query-by-emoji retrieval",
               "emojimodal"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto common = [&](CLI::App* sub) {
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--config", o.config, "Flat key=value file; explicit flags override it");
    sub->add_option("--seed", o.seed, "Seed for all randomness")->capture_default_str();
  };
  auto need_catalog = [&](CLI::App* sub) {
    sub->add_option("--catalog", o.catalog, "Emoji catalog TSV")->required();
  };
  auto add_topk = [&](CLI::App* sub) {
    sub->add_option("--topk", o.topk, "Comma-separated k values")->capture_default_str();
    sub->add_flag("--json", o.as_json, "Emit JSON lines instead of key=value text");
  };

  auto* ingest_cmd = app.add_subcommand("ingest", "Build an annotated corpus from JSONL records");
  common(ingest_cmd);
  need_catalog(ingest_cmd);
  ingest_cmd->add_option("--input", o.input, "JSONL records {id, text, image_features?}")->required();
  ingest_cmd->add_option("--out", o.out, "Output corpus (.emjc)")->required();
  ingest_cmd->add_option("--image-dim", o.image_dim, "Required image feature width (0 = infer)");
  ingest_cmd->add_flag("--letterwise-flags", o.letterwise_flags, "Treat regional indicators one letter at a time");
  ingest_cmd->add_flag("--no-modifier-fallback", o.no_modifier_fallback,
                       "Do not map unknown modifier variants to their base emoji");

  auto* split_cmd = app.add_subcommand("split", "Split a corpus into train/validation/test");
  common(split_cmd);
  need_catalog(split_cmd);
  split_cmd->add_option("--corpus", o.corpus, "Input corpus (.emjc)")->required();
  split_cmd->add_option("--out-dir", o.out_dir, "Directory for train/validation/test.emjc")->required();
  split_cmd->add_option("--ratios", o.ratios, "train:validation:test fractions")->capture_default_str();
  split_cmd->add_option("--test-cap", o.test_cap, "Per-class cap for a balanced test subset (0 = off)");
  split_cmd->add_flag("--image-subset", o.image_only,
                      "Keep image documents and drop evaluation images duplicated in train");

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus with known ground truth");
  common(synth_cmd);
  synth_cmd->add_option("--classes", o.synth.classes, "Number of emoji classes")->capture_default_str();
  synth_cmd->add_option("--docs", o.synth.docs, "Number of documents")->capture_default_str();
  synth_cmd->add_option("--strength", o.synth.strength, "Probability a document carries its own signature")
      ->capture_default_str();
  synth_cmd->add_option("--filler-vocab", o.synth.filler_vocab, "Filler vocabulary size")->capture_default_str();
  synth_cmd->add_option("--text-classes", o.text_classes, "begin:end classes explained by text (default all)");
  synth_cmd->add_option("--image-dim", o.synth.image_dim, "Image feature width (0 = no images)")
      ->capture_default_str();
  synth_cmd->add_option("--image-noise", o.synth.image_noise, "Image feature noise sigma")->capture_default_str();
  synth_cmd->add_option("--image-classes", o.image_classes, "begin:end classes explained by images (default all)");
  synth_cmd->add_option("--multi-label-rate", o.synth.multi_label_rate, "Probability of a second emoji")
      ->capture_default_str();
  synth_cmd->add_option("--embedding-dim", o.synth.embedding_dim, "Write random word vectors (0 = off)")
      ->capture_default_str();
  synth_cmd->add_option("--concepts", o.synth.concepts_per_doc, "Visual concepts per document (0 = off)")
      ->capture_default_str();
  synth_cmd->add_option("--ratios", o.ratios, "train:validation:test fractions")->capture_default_str();
  synth_cmd->add_option("--out-dir", o.out_dir, "Output directory")->required();

  auto* text_cmd = app.add_subcommand("train-text", "Train the bidirectional recurrent text model");
  common(text_cmd);
  need_catalog(text_cmd);
  text_cmd->add_option("--train", o.train, "Training corpus (.emjc)")->required();
  text_cmd->add_option("--validation", o.validation, "Validation corpus (.emjc)")->required();
  text_cmd->add_option("--out", o.out, "Output checkpoint (.emjt); a .json sidecar is written next to it")
      ->required();
  text_cmd->add_option("--embed-dim", o.text.embed_dim, "Token embedding width")->capture_default_str();
  text_cmd->add_option("--hidden-dim", o.text.hidden_dim, "Hidden state width per direction")
      ->capture_default_str();
  text_cmd->add_option("--min-count", o.text.min_count, "Minimum token count for the vocabulary")
      ->capture_default_str();
  text_cmd->add_option("--max-tokens", o.text.max_tokens, "Tokens kept per document")->capture_default_str();
  text_cmd->add_option("--init-scale", o.text.init_scale, "Uniform initialization range")->capture_default_str();
  add_train_options(text_cmd, o);

  auto* image_cmd = app.add_subcommand("train-image", "Train the softmax head over image features");
  common(image_cmd);
  need_catalog(image_cmd);
  image_cmd->add_option("--train", o.train, "Training corpus (.emjc)")->required();
  image_cmd->add_option("--validation", o.validation, "Validation corpus (.emjc)")->required();
  image_cmd->add_option("--out", o.out, "Output checkpoint (.emjv); a .json sidecar is written next to it")
      ->required();
  o.train_config.l2 = kDefaultImageL2;
  image_cmd->add_option("--l2", o.train_config.l2, "Weight decay on W")->capture_default_str();
  add_train_options(image_cmd, o);

  auto* sweep_cmd = app.add_subcommand("sweep-alpha", "Validation msAP of late fusion over an alpha grid");
  common(sweep_cmd);
  need_catalog(sweep_cmd);
  sweep_cmd->add_option("--corpus", o.corpus, "Validation corpus (.emjc)")->required();
  sweep_cmd->add_option("--text-model", o.text_model, "Text checkpoint")->required();
  sweep_cmd->add_option("--image-model", o.image_model, "Image checkpoint")->required();
  sweep_cmd->add_option("--grid", o.grid, "lo:hi:step")->capture_default_str();

  auto* eval_cmd = app.add_subcommand("eval", "Top-k accuracy and msAP of supervised models");
  common(eval_cmd);
  need_catalog(eval_cmd);
  eval_cmd->add_option("--corpus", o.corpus, "Evaluation corpus (.emjc)")->required();
  eval_cmd->add_option("--text-model", o.text_model, "Text checkpoint");
  eval_cmd->add_option("--image-model", o.image_model, "Image checkpoint");
  eval_cmd->add_option("--alpha", o.alpha, "Text weight when both models are given (default 0.5)");
  add_topk(eval_cmd);

  auto* zs_cmd = app.add_subcommand("zeroshot-eval", "Zero-shot prediction and retrieval from word embeddings");
  common(zs_cmd);
  need_catalog(zs_cmd);
  zs_cmd->add_option("--corpus", o.corpus, "Evaluation corpus (.emjc)")->required();
  zs_cmd->add_option("--embeddings", o.embeddings, "Word vectors, one 'token v1 .. vd' per line")->required();
  zs_cmd->add_option("--concepts", o.concepts, "Per-document visual concepts TSV");
  zs_cmd->add_option("--mode", o.mode, "text, image or fused")->capture_default_str();
  add_topk(zs_cmd);

  auto* index_cmd = app.add_subcommand("index", "Score every document and save a retrieval index");
  common(index_cmd);
  need_catalog(index_cmd);
  index_cmd->add_option("--corpus", o.corpus, "Corpus to index (.emjc)")->required();
  index_cmd->add_option("--scorer", o.scorer, "text, image, fused or zeroshot")->capture_default_str();
  index_cmd->add_option("--text-model", o.text_model, "Text checkpoint");
  index_cmd->add_option("--image-model", o.image_model, "Image checkpoint");
  index_cmd->add_option("--alpha", o.alpha, "Text weight for the fused scorer (default 0.5)");
  index_cmd->add_option("--embeddings", o.embeddings, "Word vectors for the zeroshot scorer");
  index_cmd->add_option("--concepts", o.concepts, "Visual concepts for the zeroshot scorer");
  index_cmd->add_option("--mode", o.mode, "Zero-shot modality: text, image or fused")->capture_default_str();
  index_cmd->add_option("--out", o.out, "Output index (.emjx)")->required();

  auto* search_cmd = app.add_subcommand("search", "Rank indexed documents for an emoji query");
  common(search_cmd);
  need_catalog(search_cmd);
  search_cmd->add_option("--index", o.index, "Retrieval index (.emjx)")->required();
  search_cmd->add_option("--query,-q", o.query, "One or more emoji")->required();
  search_cmd->add_option("--k", o.k, "Results to return")->capture_default_str();
  search_cmd->add_option("--combine", o.combine, "geo, min or mean")->capture_default_str();
  search_cmd->add_flag("--json", o.as_json, "Emit JSON lines");

  auto* serve_cmd = app.add_subcommand("serve", "Serve the retrieval index over HTTP");
  common(serve_cmd);
  need_catalog(serve_cmd);
  serve_cmd->add_option("--index", o.index, "Retrieval index (.emjx)")->required();
  serve_cmd->add_option("--text-model", o.text_model, "Text checkpoint for /predict");
  serve_cmd->add_option("--image-model", o.image_model, "Image checkpoint for /predict");
  serve_cmd->add_option("--embeddings", o.embeddings, "Word vectors for zero-shot /predict");
  serve_cmd->add_option("--alpha", o.alpha, "Default fusion weight for /predict");
  serve_cmd->add_option("--host", o.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", o.port, "Port (0 = any free port)")->capture_default_str();
  serve_cmd->add_option("--ui", o.ui, "Directory served under /ui/");

  auto* metrics_cmd = app.add_subcommand("metrics", "Top-k and msAP from score and label tables");
  common(metrics_cmd);
  metrics_cmd->add_option("--scores", o.scores, "N x C whitespace-separated scores")->required();
  metrics_cmd->add_option("--labels", o.labels, "N x C whitespace-separated 0/1 labels")->required();
  add_topk(metrics_cmd);

  try {
    std::vector<std::string> args = apply_config_overlay(raw_args, app);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name());
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "ingest") return cmd_ingest(o, out);
    if (name == "split") return cmd_split(o, out);
    if (name == "synth") return cmd_synth(o, out);
    if (name == "train-text") return cmd_train_text(o, out);
    if (name == "train-image") return cmd_train_image(o, out);
    if (name == "sweep-alpha") return cmd_sweep(o, out);
    if (name == "eval") return cmd_eval(o, out);
    if (name == "zeroshot-eval") return cmd_zeroshot(o, out);
    if (name == "index") return cmd_index(o, out);
    if (name == "search") return cmd_search(o, out);
    if (name == "serve") return cmd_serve(o, out);
    if (name == "metrics") return cmd_metrics(o, out);
    err << app.help();
    return 1;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace emojimodal::cli
