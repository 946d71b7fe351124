#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "emojimodal/retrieval.hpp"
#include "emojimodal/zeroshot.hpp"

namespace emojimodal {

struct TextModel;
struct LinearSoftmaxModel;

// Models behind POST /predict; any member may be absent.
struct PredictModels {
  std::shared_ptr<const TextModel> text;
  std::shared_ptr<const LinearSoftmaxModel> image;
  std::shared_ptr<const EmbeddingTable> embeddings;
  std::vector<EmojiPrototype> prototypes;
  double default_alpha = 0.5;
};

struct ServiceReply {
  int status = 200;
  std::string body;  // JSON
};

// HTTP front end over a ScoreIndex:
//   GET  /search?q=&k=&combine=geo|min|mean
//   POST /predict {text?, image_features?, concepts?, alpha?, mode?, k?}
//   GET  /catalog, GET /healthz, static files under /ui/.
// Errors are {"error": {"code", "message"}} with status 400 or 404.
class RetrievalService {
 public:
  RetrievalService(std::shared_ptr<const ScoreIndex> index, PredictModels models = {},
                   std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~RetrievalService();
  RetrievalService(const RetrievalService&) = delete;
  RetrievalService& operator=(const RetrievalService&) = delete;

  // In-flight requests keep the index they started with.
  void swap_index(std::shared_ptr<const ScoreIndex> index);
  std::shared_ptr<const ScoreIndex> index() const;

  ServiceReply search(const std::optional<std::string>& q, const std::optional<std::string>& k,
                      const std::optional<std::string>& combine) const;
  ServiceReply predict(const std::string& body) const;
  ServiceReply catalog() const;
  ServiceReply healthz() const;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port; throws DataError when binding fails.
  int start(const std::string& host, int port);
  int port() const { return port_; }
  void stop();

 private:
  struct Server;

  mutable std::mutex index_mutex_;
  std::shared_ptr<const ScoreIndex> index_;
  PredictModels models_;
  std::optional<std::filesystem::path> ui_dir_;
  std::unique_ptr<Server> server_;
  int port_ = -1;
};

}  // namespace emojimodal
