#include "emojimodal/service.hpp"

#include <algorithm>
#include <charconv>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <json.hpp>

#include "emojimodal/error.hpp"
#include "emojimodal/fusion.hpp"
#include "emojimodal/metrics.hpp"
#include "emojimodal/text_model.hpp"
#include "emojimodal/vision_model.hpp"

namespace emojimodal {

using nlohmann::json;

namespace {

constexpr std::size_t kDefaultSearchK = 10;
constexpr std::size_t kDefaultPredictK = 5;

ServiceReply error_reply(int status, const std::string& code, const std::string& message) {
  return {status, json{{"error", {{"code", code}, {"message", message}}}}.dump()};
}

std::optional<std::size_t> parse_count(const std::string& text) {
  std::size_t value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || value < 1) return std::nullopt;
  return value;
}

json topk_json(const EmojiCatalog& catalog, const ScoreVector& scores, std::size_t k) {
  std::vector<double> values(scores.data(), scores.data() + scores.size());
  const std::vector<std::size_t> order = rank_order(values);
  json out = json::array();
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
    const EmojiEntry& e = catalog[static_cast<ClassIndex>(order[r])];
    out.push_back({{"emoji", e.utf8()}, {"name", e.name}, {"score", values[order[r]]}});
  }
  return out;
}

}  // namespace

struct RetrievalService::Server {
  httplib::Server http;
  std::thread thread;
};

RetrievalService::RetrievalService(std::shared_ptr<const ScoreIndex> index, PredictModels models,
                                   std::optional<std::filesystem::path> ui_dir)
    : index_(std::move(index)), models_(std::move(models)), ui_dir_(std::move(ui_dir)) {
  if (!index_) throw std::invalid_argument("service requires an index");
}

RetrievalService::~RetrievalService() { stop(); }

void RetrievalService::swap_index(std::shared_ptr<const ScoreIndex> index) {
  if (!index) throw std::invalid_argument("service requires an index");
  std::lock_guard lock(index_mutex_);
  index_ = std::move(index);
}

std::shared_ptr<const ScoreIndex> RetrievalService::index() const {
  std::lock_guard lock(index_mutex_);
  return index_;
}

ServiceReply RetrievalService::search(const std::optional<std::string>& q, const std::optional<std::string>& k,
                                      const std::optional<std::string>& combine) const {
  if (!q || q->empty()) return error_reply(400, "missing_query", "parameter q is required");
  std::size_t top_k = kDefaultSearchK;
  if (k) {
    const auto parsed = parse_count(*k);
    if (!parsed) return error_reply(400, "bad_parameter", "k must be a positive integer");
    top_k = *parsed;
  }
  Combine mode = Combine::kGeometricMean;
  if (combine) {
    try {
      mode = parse_combine(*combine);
    } catch (const std::invalid_argument& e) {
      return error_reply(400, "bad_parameter", e.what());
    }
  }
  const auto snapshot = index();
  EmojiQuery parsed;
  try {
    parsed = parse_query(*q, snapshot->catalog());
  } catch (const UnknownEmojiError& e) {
    json body{{"error", {{"code", "unknown_emoji"}, {"message", e.what()}, {"sequences", e.sequences()}}}};
    return {400, body.dump()};
  } catch (const DataError& e) {
    return error_reply(400, "empty_query", e.what());
  }
  json results = json::array();
  for (const RankedResult& r : query(*snapshot, parsed, top_k, mode)) {
    results.push_back({{"doc_id", r.doc_id},
                       {"score", r.score},
                       {"rank", r.rank},
                       {"snippet", r.snippet},
                       {"has_image", r.has_image}});
  }
  return {200, json{{"query", *q}, {"combine", combine_name(mode)}, {"results", std::move(results)}}.dump()};
}

ServiceReply RetrievalService::predict(const std::string& body) const {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::parse_error& e) {
    return error_reply(400, "bad_json", e.what());
  }
  if (!req.is_object()) return error_reply(400, "bad_json", "body must be a JSON object");

  const auto snapshot = index();
  const EmojiCatalog& catalog = snapshot->catalog();
  try {
    const std::string mode = req.value("mode", std::string("supervised"));
    const std::size_t k = req.value("k", kDefaultPredictK);
    if (k < 1) return error_reply(400, "bad_parameter", "k must be positive");
    const double alpha_value = req.value("alpha", models_.default_alpha);
    const FusionWeight alpha(alpha_value);

    std::optional<std::string> stripped;
    if (req.contains("text")) {
      stripped = segment(req.at("text").get<std::string>(), catalog).stripped_text;
    }
    std::optional<std::vector<double>> features;
    if (req.contains("image_features")) features = req.at("image_features").get<std::vector<double>>();

    ScoreVector scores;
    if (mode == "supervised" || mode == "fused") {
      std::optional<ScoreVector> text_p, image_p;
      if (stripped && models_.text) {
        const auto tokens = models_.text->encode(*stripped);
        text_p = forward(models_.text->params, tokens);
      }
      if (features && models_.image) {
        if (features->size() != models_.image->image_dim()) {
          return error_reply(400, "bad_parameter",
                             "image_features must have " + std::to_string(models_.image->image_dim()) + " values");
        }
        image_p = predict_image(*models_.image, *features);
      }
      if (mode == "fused" && !(text_p && image_p)) {
        return error_reply(400, "model_unavailable", "fused mode needs text, image_features and both models");
      }
      if (text_p && image_p) {
        scores = fuse(*text_p, *image_p, alpha);
      } else if (text_p) {
        scores = *text_p;
      } else if (image_p) {
        scores = *image_p;
      } else if (!stripped && !features) {
        return error_reply(400, "missing_input", "provide text or image_features");
      } else {
        return error_reply(400, "model_unavailable", "no model loaded for the given input");
      }
    } else if (mode == "zeroshot") {
      if (!models_.embeddings || models_.prototypes.empty()) {
        return error_reply(400, "model_unavailable", "zero-shot needs word embeddings");
      }
      std::optional<ScoreVector> text_sim, image_sim;
      if (stripped) {
        if (auto v = embed_text(*stripped, *models_.embeddings)) {
          text_sim = zeroshot_scores(*v, models_.prototypes, catalog.size());
        }
      }
      if (req.contains("concepts")) {
        ConceptScores concepts;
        for (const auto& item : req.at("concepts")) {
          concepts.concepts.emplace_back(item.at("name").get<std::string>(), item.at("confidence").get<double>());
        }
        if (auto v = embed_image_concepts(concepts, *models_.embeddings)) {
          image_sim = zeroshot_scores(*v, models_.prototypes, catalog.size());
        }
      }
      if (!text_sim && !image_sim) {
        return error_reply(400, "missing_input", "no input term found in the embedding vocabulary");
      }
      scores = zeroshot_fused(text_sim, image_sim, models_.prototypes, alpha.value());
    } else {
      return error_reply(400, "bad_parameter", "mode must be supervised, fused or zeroshot");
    }
    return {200, json{{"mode", mode}, {"topk", topk_json(catalog, scores, k)}}.dump()};
  } catch (const json::exception& e) {
    return error_reply(400, "bad_parameter", e.what());
  } catch (const std::invalid_argument& e) {
    return error_reply(400, "bad_parameter", e.what());
  } catch (const DataError& e) {
    return error_reply(400, "bad_input", e.what());
  }
}

ServiceReply RetrievalService::catalog() const {
  const auto snapshot = index();
  json list = json::array();
  for (const EmojiEntry& e : snapshot->catalog().entries()) {
    list.push_back({{"emoji", e.utf8()},
                    {"name", e.name},
                    {"class_index", e.class_index},
                    {"sequence", unicode::to_hex_sequence(e.sequence)}});
  }
  return {200, json{{"emoji", std::move(list)}}.dump()};
}

ServiceReply RetrievalService::healthz() const {
  const auto snapshot = index();
  return {200, json{{"status", "ok"}, {"documents", snapshot->size()}, {"scorer", snapshot->scorer_tag()}}.dump()};
}

int RetrievalService::start(const std::string& host, int port) {
  if (server_) throw std::logic_error("service already started");
  auto server = std::make_unique<Server>();
  auto& http = server->http;
  auto send = [](httplib::Response& res, const ServiceReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, "application/json; charset=utf-8");
  };
  auto param = [](const httplib::Request& req, const char* name) -> std::optional<std::string> {
    if (!req.has_param(name)) return std::nullopt;
    return req.get_param_value(name);
  };
  http.Get("/search", [this, send, param](const httplib::Request& req, httplib::Response& res) {
    send(res, search(param(req, "q"), param(req, "k"), param(req, "combine")));
  });
  http.Post("/predict",
            [this, send](const httplib::Request& req, httplib::Response& res) { send(res, predict(req.body)); });
  http.Get("/catalog", [this, send](const httplib::Request&, httplib::Response& res) { send(res, catalog()); });
  http.Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) { send(res, healthz()); });
  if (ui_dir_) {
    if (!http.set_mount_point("/ui", ui_dir_->string())) {
      throw DataError("ui directory not found: " + ui_dir_->string());
    }
  }
  http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.status == 404 && res.body.empty()) {
      res.set_content(json{{"error", {{"code", "not_found"}, {"message", "no such endpoint"}}}}.dump(),
                      "application/json; charset=utf-8");
    }
  });

  http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });

  const int bound = port == 0 ? http.bind_to_any_port(host) : (http.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw DataError("cannot bind " + host + ":" + std::to_string(port));
  server->thread = std::thread([&http] { http.listen_after_bind(); });
  http.wait_until_ready();
  port_ = bound;
  server_ = std::move(server);
  spdlog::info("serving on {}:{}", host, port_);
  return port_;
}

void RetrievalService::stop() {
  if (!server_) return;
  server_->http.stop();
  if (server_->thread.joinable()) server_->thread.join();
  server_.reset();
  port_ = -1;
}

}  // namespace emojimodal
