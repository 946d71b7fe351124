#include <gtest/gtest.h>

#include <future>
#include <thread>

#include <json.hpp>

#include "emojimodal/service.hpp"
#include "emojimodal/synthetic.hpp"
#include "emojimodal/text_model.hpp"
#include "emojimodal/vision_model.hpp"
#include "unit/test_support.hpp"

#include <httplib.h>

namespace emojimodal {
namespace {

using nlohmann::json;

std::shared_ptr<const EmojiCatalog> catalog3() { return std::make_shared<const EmojiCatalog>(synthetic_catalog(3)); }

std::shared_ptr<const ScoreIndex> small_index(std::shared_ptr<const EmojiCatalog> cat, std::string tag = "text") {
  ScoreMatrix s(3, 3);
  s << 0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.4, 0.4, 0.2;
  return std::make_shared<const ScoreIndex>(std::vector<std::string>{"a", "b", "c"},
                                            std::vector<std::string>{"sa", "sb", "sc"},
                                            std::vector<bool>{true, false, false}, s, std::move(tag), cat);
}

std::string e(const EmojiCatalog& cat, ClassIndex c) { return cat[c].utf8(); }

PredictModels models_for(const EmojiCatalog& cat) {
  PredictModels m;
  auto text = std::make_shared<TextModel>();
  text->vocab = Vocabulary(std::vector<std::string>{"hello", "sig0"});
  text->params = init_params(text->vocab.size(), 3, 3, 3, 0.5, 4);
  m.text = text;
  auto image = std::make_shared<LinearSoftmaxModel>(LinearSoftmaxModel::zeros(2, 3));
  image->weights << 1.0, 0.0, 0.0, 0.0, 0.0, 2.0;
  m.image = image;
  auto table = std::make_shared<EmbeddingTable>(std::vector<std::pair<std::string, std::vector<double>>>{
      {"sig0", {1.0, 0.0}}, {"sig1", {0.0, 1.0}}, {"sig2", {-1.0, 0.0}}, {"cloud", {0.1, 1.0}}});
  m.embeddings = table;
  m.prototypes = build_prototypes(cat, *table);
  return m;
}

TEST(ServiceHandlersTest, SearchReturnsRankedResults) {
  const auto cat = catalog3();
  RetrievalService svc(small_index(cat));
  const ServiceReply r = svc.search(e(*cat, 0), std::string("2"), std::nullopt);
  ASSERT_EQ(r.status, 200);
  const json body = json::parse(r.body);
  EXPECT_EQ(body["query"], e(*cat, 0));
  EXPECT_EQ(body["combine"], "geo");
  ASSERT_EQ(body["results"].size(), 2u);
  EXPECT_EQ(body["results"][0]["doc_id"], "a");
  EXPECT_EQ(body["results"][0]["rank"], 1);
  EXPECT_EQ(body["results"][0]["score"], 0.7);
  EXPECT_EQ(body["results"][0]["snippet"], "sa");
  EXPECT_EQ(body["results"][0]["has_image"], true);
  EXPECT_EQ(body["results"][1]["doc_id"], "c");

  const json both = json::parse(svc.search(e(*cat, 0) + e(*cat, 1), std::nullopt, std::string("min")).body);
  EXPECT_EQ(both["results"][0]["doc_id"], "c");
  EXPECT_EQ(both["results"].size(), 3u);
}

TEST(ServiceHandlersTest, SearchErrors) {
  const auto cat = catalog3();
  RetrievalService svc(small_index(cat));
  auto code = [](const ServiceReply& r) { return json::parse(r.body)["error"]["code"].get<std::string>(); };
  EXPECT_EQ(code(svc.search(std::nullopt, std::nullopt, std::nullopt)), "missing_query");
  EXPECT_EQ(code(svc.search(e(*cat, 0), std::string("0"), std::nullopt)), "bad_parameter");
  EXPECT_EQ(code(svc.search(e(*cat, 0), std::string("x"), std::nullopt)), "bad_parameter");
  EXPECT_EQ(code(svc.search(e(*cat, 0), std::nullopt, std::string("max"))), "bad_parameter");
  EXPECT_EQ(code(svc.search(std::string("   "), std::nullopt, std::nullopt)), "empty_query");
  const ServiceReply unknown = svc.search(std::string("\xF0\x9F\xA6\x84"), std::nullopt, std::nullopt);
  EXPECT_EQ(unknown.status, 400);
  EXPECT_EQ(code(unknown), "unknown_emoji");
  EXPECT_EQ(json::parse(unknown.body)["error"]["sequences"][0], "U+1F984");
}

TEST(ServiceHandlersTest, PredictModes) {
  const auto cat = catalog3();
  RetrievalService svc(small_index(cat), models_for(*cat));

  const ServiceReply img = svc.predict(R"({"image_features":[0.0,3.0],"k":2})");
  ASSERT_EQ(img.status, 200) << img.body;
  const json ib = json::parse(img.body);
  EXPECT_EQ(ib["mode"], "supervised");
  ASSERT_EQ(ib["topk"].size(), 2u);
  EXPECT_EQ(ib["topk"][0]["emoji"], e(*cat, 2));
  EXPECT_EQ(ib["topk"][0]["name"], "emoji2");

  const ServiceReply txt = svc.predict(R"({"text":"hello sig0"})");
  ASSERT_EQ(txt.status, 200);
  EXPECT_EQ(json::parse(txt.body)["topk"].size(), 3u);

  const ServiceReply fused = svc.predict(R"({"mode":"fused","text":"hello","image_features":[1,0],"alpha":0.25})");
  ASSERT_EQ(fused.status, 200) << fused.body;
  double total = 0.0;
  const json fb = json::parse(fused.body);
  for (const auto& item : fb["topk"]) total += item["score"].get<double>();
  EXPECT_NEAR(total, 1.0, 1e-12) << fused.body;

  const ServiceReply zs = svc.predict(R"({"mode":"zeroshot","text":"sig1 weather","k":1})");
  ASSERT_EQ(zs.status, 200) << zs.body;
  EXPECT_EQ(json::parse(zs.body)["topk"][0]["emoji"], e(*cat, 1));
  const ServiceReply zc = svc.predict(R"({"mode":"zeroshot","concepts":[{"name":"sig2","confidence":0.9}],"k":1})");
  EXPECT_EQ(json::parse(zc.body)["topk"][0]["emoji"], e(*cat, 2));
}

TEST(ServiceHandlersTest, PredictErrors) {
  const auto cat = catalog3();
  RetrievalService bare(small_index(cat));
  RetrievalService svc(small_index(cat), models_for(*cat));
  auto code = [](const ServiceReply& r) {
    EXPECT_EQ(r.status, 400);
    return json::parse(r.body)["error"]["code"].get<std::string>();
  };
  EXPECT_EQ(code(svc.predict("{nope")), "bad_json");
  EXPECT_EQ(code(svc.predict("[1,2]")), "bad_json");
  EXPECT_EQ(code(svc.predict("{}")), "missing_input");
  EXPECT_EQ(code(bare.predict(R"({"text":"hello"})")), "model_unavailable");
  EXPECT_EQ(code(bare.predict(R"({"mode":"zeroshot","text":"sig0"})")), "model_unavailable");
  EXPECT_EQ(code(svc.predict(R"({"mode":"fused","text":"hello"})")), "model_unavailable");
  EXPECT_EQ(code(svc.predict(R"({"image_features":[1,2,3]})")), "bad_parameter");
  EXPECT_EQ(code(svc.predict(R"({"text":"hello","alpha":2})")), "bad_parameter");
  EXPECT_EQ(code(svc.predict(R"({"text":"hello","mode":"other"})")), "bad_parameter");
  EXPECT_EQ(code(svc.predict(R"({"text":5})")), "bad_parameter");
  EXPECT_EQ(code(svc.predict(R"({"mode":"zeroshot","text":"unrelated words"})")), "missing_input");
}

TEST(ServiceHandlersTest, CatalogAndHealth) {
  const auto cat = catalog3();
  RetrievalService svc(small_index(cat, "fused:0.6"));
  const json c = json::parse(svc.catalog().body);
  ASSERT_EQ(c["emoji"].size(), 3u);
  EXPECT_EQ(c["emoji"][1]["emoji"], e(*cat, 1));
  EXPECT_EQ(c["emoji"][1]["class_index"], 1);
  EXPECT_EQ(c["emoji"][1]["name"], "emoji1");
  const json h = json::parse(svc.healthz().body);
  EXPECT_EQ(h["status"], "ok");
  EXPECT_EQ(h["documents"], 3);
  EXPECT_EQ(h["scorer"], "fused:0.6");
}

TEST(ServiceHandlersTest, SwapIndexKeepsOldSnapshotsAlive) {
  const auto cat = catalog3();
  RetrievalService svc(small_index(cat, "old"));
  const auto held = svc.index();
  svc.swap_index(small_index(cat, "new"));
  EXPECT_EQ(held->scorer_tag(), "old");
  EXPECT_EQ(json::parse(svc.healthz().body)["scorer"], "new");
  EXPECT_THROW(svc.swap_index(nullptr), std::invalid_argument);
}

class ServiceHttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cat_ = catalog3();
    testing::write_file(ui_ / "index.html", "<html>emoji</html>");
    svc_ = std::make_unique<RetrievalService>(small_index(cat_), models_for(*cat_), ui_.path());
    port_ = svc_->start("127.0.0.1", 0);
  }
  void TearDown() override { svc_->stop(); }

  std::shared_ptr<const EmojiCatalog> cat_;
  testing::TempDir ui_;
  std::unique_ptr<RetrievalService> svc_;
  int port_ = 0;
};

TEST_F(ServiceHttpTest, EndpointsOverTheWire) {
  httplib::Client client("127.0.0.1", port_);
  auto health = client.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body)["status"], "ok");
  EXPECT_NE(health->get_header_value("Content-Type").find("application/json"), std::string::npos);

  httplib::Params params{{"q", e(*cat_, 1)}, {"k", "1"}};
  auto search = client.Get("/search", params, httplib::Headers{});
  ASSERT_TRUE(search);
  EXPECT_EQ(search->status, 200);
  EXPECT_EQ(json::parse(search->body)["results"][0]["doc_id"], "b");

  auto unknown = client.Get("/search", httplib::Params{{"q", "\xF0\x9F\xA6\x84"}}, httplib::Headers{});
  ASSERT_TRUE(unknown);
  EXPECT_EQ(unknown->status, 400);
  EXPECT_EQ(json::parse(unknown->body)["error"]["code"], "unknown_emoji");

  auto predict = client.Post("/predict", R"({"image_features":[0,1]})", "application/json");
  ASSERT_TRUE(predict);
  EXPECT_EQ(predict->status, 200);
  auto bad = client.Post("/predict", "{", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  auto catalog = client.Get("/catalog");
  ASSERT_TRUE(catalog);
  EXPECT_EQ(json::parse(catalog->body)["emoji"].size(), 3u);

  auto ui = client.Get("/ui/index.html");
  ASSERT_TRUE(ui);
  EXPECT_EQ(ui->status, 200);
  EXPECT_EQ(ui->body, "<html>emoji</html>");

  auto missing = client.Get("/nowhere");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(json::parse(missing->body)["error"]["code"], "not_found");
}

TEST_F(ServiceHttpTest, ConcurrentIdenticalRequestsAgree) {
  const std::string q = e(*cat_, 0) + e(*cat_, 1);
  auto fetch = [&] {
    httplib::Client client("127.0.0.1", port_);
    auto res = client.Get("/search", httplib::Params{{"q", q}, {"k", "3"}}, httplib::Headers{});
    return res ? std::to_string(res->status) + res->body : std::string("no response");
  };
  std::vector<std::future<std::string>> pending;
  for (int i = 0; i < 100; ++i) pending.push_back(std::async(std::launch::async, fetch));
  const std::string first = pending[0].get();
  EXPECT_EQ(first.substr(0, 3), "200");
  for (std::size_t i = 1; i < pending.size(); ++i) EXPECT_EQ(pending[i].get(), first);
}

TEST_F(ServiceHttpTest, SwapIsVisibleToNewRequests) {
  svc_->swap_index(small_index(cat_, "swapped"));
  httplib::Client client("127.0.0.1", port_);
  auto res = client.Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["scorer"], "swapped");
}

TEST(ServiceStartTest, MissingUiDirectoryAndBusyPort) {
  const auto cat = catalog3();
  RetrievalService svc(small_index(cat), {}, std::filesystem::path("/nonexistent/ui/dir"));
  EXPECT_THROW(svc.start("127.0.0.1", 0), DataError);

  RetrievalService first(small_index(cat));
  const int port = first.start("127.0.0.1", 0);
  RetrievalService second(small_index(cat));
  EXPECT_THROW(second.start("127.0.0.1", port), DataError);
  first.stop();
  first.stop();
}

}  // namespace
}  // namespace emojimodal
