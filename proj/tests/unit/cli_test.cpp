#include <gtest/gtest.h>

#include <sstream>

#include "emojimodal/cli.hpp"
#include "unit/test_support.hpp"

namespace emojimodal {
namespace {

using testing::read_file;
using testing::TempDir;
using testing::write_file;

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

class CliMetricsTest : public ::testing::Test {
 protected:
  void SetUp() override {
    write_file(dir_ / "s.tsv", "0.5 0.3 0.2\n0.1 0.2 0.7\n");
    write_file(dir_ / "y.tsv", "0 1 0\n0 0 1\n");
  }
  TempDir dir_;
};

TEST_F(CliMetricsTest, PrintsTopKAndMsap) {
  const auto r = run({"metrics", "--scores", (dir_ / "s.tsv").string(), "--labels", (dir_ / "y.tsv").string(),
                      "--topk", "1,5,10,100"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "top_1=0.500000\ntop_3=1.000000\ntop_3=1.000000\ntop_3=1.000000\nmsap=0.750000\n");
}

TEST_F(CliMetricsTest, JsonLines) {
  const auto r = run({"metrics", "--scores", (dir_ / "s.tsv").string(), "--labels", (dir_ / "y.tsv").string(),
                      "--topk", "1", "--json"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(contains(r.out, "\"name\":\"top_1\"")) << r.out;
  EXPECT_TRUE(contains(r.out, "\"name\":\"msap\"")) << r.out;
}

TEST_F(CliMetricsTest, MalformedInputIsADataError) {
  write_file(dir_ / "ragged.tsv", "0.5 0.3\n0.1 0.2 0.7\n");
  write_file(dir_ / "text.tsv", "0.5 abc 0.2\n0.1 0.2 0.7\n");
  write_file(dir_ / "y2.tsv", "0 2 0\n0 0 1\n");
  write_file(dir_ / "none.tsv", "0 0 0\n0 0 1\n");
  const std::string y = (dir_ / "y.tsv").string();
  for (const std::string scores : {"ragged.tsv", "text.tsv", "missing.tsv"}) {
    const auto r = run({"metrics", "--scores", (dir_ / scores).string(), "--labels", y});
    EXPECT_EQ(r.code, 2) << scores;
    EXPECT_FALSE(r.err.empty());
  }
  for (const std::string labels : {"y2.tsv", "none.tsv"}) {
    const auto r = run({"metrics", "--scores", (dir_ / "s.tsv").string(), "--labels", (dir_ / labels).string()});
    EXPECT_EQ(r.code, 2) << labels;
  }
}

TEST_F(CliMetricsTest, UsageErrors) {
  EXPECT_EQ(run({"bogus"}).code, 1);
  EXPECT_FALSE(run({"bogus"}).err.empty());
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"metrics", "--scores", (dir_ / "s.tsv").string()}).code, 1);
  EXPECT_EQ(run({"metrics", "--scores", (dir_ / "s.tsv").string(), "--labels", (dir_ / "y.tsv").string(), "--topk",
                 "0"})
                .code,
            1);
  EXPECT_EQ(run({"metrics", "--no-such-flag"}).code, 1);
  const auto help = run({"metrics", "--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_TRUE(contains(help.out, "--scores"));
}

TEST_F(CliMetricsTest, ConfigOverlayYieldsToExplicitFlags) {
  write_file(dir_ / "run.conf", "# defaults\ntopk = 2\nlabels=" + (dir_ / "y.tsv").string() + "\nunrelated=1\n");
  const std::string conf = (dir_ / "run.conf").string();
  const auto from_config = run({"metrics", "--config", conf, "--scores", (dir_ / "s.tsv").string()});
  EXPECT_EQ(from_config.code, 0) << from_config.err;
  EXPECT_EQ(from_config.out, "top_2=1.000000\nmsap=0.750000\n");
  const auto explicit_flag =
      run({"metrics", "--config", conf, "--scores", (dir_ / "s.tsv").string(), "--topk", "1"});
  EXPECT_EQ(explicit_flag.out, "top_1=0.500000\nmsap=0.750000\n");
  write_file(dir_ / "broken.conf", "topk\n");
  EXPECT_EQ(run({"metrics", "--config", (dir_ / "broken.conf").string(), "--scores", (dir_ / "s.tsv").string(),
                 "--labels", (dir_ / "y.tsv").string()})
                .code,
            1);
}

class CliPipelineTest : public ::testing::Test {
 protected:
  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  RunResult synth(const std::string& out_dir, const std::string& seed) {
    return run({"synth", "--classes", "4", "--docs", "160", "--filler-vocab", "30", "--image-dim", "4",
                "--embedding-dim", "8", "--concepts", "2", "--seed", seed, "--out-dir", out_dir});
  }

  RunResult train_text(const std::string& data, const std::string& out) {
    return run({"train-text", "--catalog", data + "/catalog.tsv", "--train", data + "/train.emjc", "--validation",
                data + "/validation.emjc", "--out", out, "--embed-dim", "8", "--hidden-dim", "8", "--min-count",
                "1", "--lr", "1.0", "--epochs", "4", "--epoch-draws", "640", "--batch-size", "16", "--seed", "3"});
  }

  TempDir dir_;
};

TEST_F(CliPipelineTest, SameSeedGivesIdenticalArtifacts) {
  ASSERT_EQ(synth(p("a"), "7").code, 0);
  ASSERT_EQ(synth(p("b"), "7").code, 0);
  ASSERT_EQ(synth(p("c"), "8").code, 0);
  for (const std::string f : {"catalog.tsv", "corpus.jsonl", "truth.json", "train.emjc", "test.emjc",
                              "embeddings.txt", "concepts.tsv"}) {
    EXPECT_EQ(read_file(dir_ / "a" / f), read_file(dir_ / "b" / f)) << f;
  }
  EXPECT_NE(read_file(dir_ / "a" / "corpus.jsonl"), read_file(dir_ / "c" / "corpus.jsonl"));

  const auto first = train_text(p("a"), p("t1.emjt"));
  const auto second = train_text(p("a"), p("t2.emjt"));
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_EQ(first.out, second.out);
  EXPECT_EQ(read_file(dir_ / "t1.emjt"), read_file(dir_ / "t2.emjt"));
  EXPECT_TRUE(std::filesystem::exists(dir_ / "t1.emjt.json"));
}

TEST_F(CliPipelineTest, TrainEvaluateIndexSearch) {
  ASSERT_EQ(synth(p("d"), "5").code, 0);
  const std::string cat = p("d/catalog.tsv");
  ASSERT_EQ(train_text(p("d"), p("t.emjt")).code, 0);
  const auto img = run({"train-image", "--catalog", cat, "--train", p("d/train.emjc"), "--validation",
                        p("d/validation.emjc"), "--out", p("v.emjv"), "--lr", "1.0"});
  ASSERT_EQ(img.code, 0) << img.err;

  const auto eval = run({"eval", "--catalog", cat, "--corpus", p("d/test.emjc"), "--text-model", p("t.emjt"),
                         "--topk", "1,2"});
  ASSERT_EQ(eval.code, 0) << eval.err;
  EXPECT_TRUE(contains(eval.out, "top_1=")) << eval.out;
  EXPECT_TRUE(contains(eval.out, "msap=")) << eval.out;

  const auto sweep = run({"sweep-alpha", "--catalog", cat, "--corpus", p("d/validation.emjc"), "--text-model",
                          p("t.emjt"), "--image-model", p("v.emjv"), "--grid", "0:1:0.5"});
  ASSERT_EQ(sweep.code, 0) << sweep.err;
  EXPECT_TRUE(contains(sweep.out, "alpha\tmsap\n0.0000\t")) << sweep.out;
  EXPECT_TRUE(contains(sweep.out, "best_alpha=")) << sweep.out;

  const auto zs = run({"zeroshot-eval", "--catalog", cat, "--corpus", p("d/test.emjc"), "--embeddings",
                       p("d/embeddings.txt"), "--concepts", p("d/concepts.tsv"), "--mode", "fused"});
  ASSERT_EQ(zs.code, 0) << zs.err;
  EXPECT_TRUE(contains(zs.out, "retrieval_map=")) << zs.out;

  const auto index = run({"index", "--catalog", cat, "--corpus", p("d/test.emjc"), "--scorer", "fused",
                          "--text-model", p("t.emjt"), "--image-model", p("v.emjv"), "--alpha", "0.6", "--out",
                          p("i.emjx")});
  ASSERT_EQ(index.code, 0) << index.err;
  EXPECT_TRUE(contains(index.out, "scorer=fused:0.6")) << index.out;

  const std::string first_emoji = read_file(dir_ / "d" / "catalog.tsv");
  const auto catalog = testing::catalog_from_tsv(first_emoji);
  const auto search = run({"search", "--catalog", cat, "--index", p("i.emjx"), "-q",
                           (*catalog)[0].utf8() + (*catalog)[1].utf8(), "--k", "3", "--combine", "mean"});
  ASSERT_EQ(search.code, 0) << search.err;
  EXPECT_TRUE(contains(search.out, "rank\tdoc_id\tscore\thas_image\tsnippet\n1\t")) << search.out;

  const auto unknown = run({"search", "--catalog", cat, "--index", p("i.emjx"), "-q", "\xF0\x9F\xA6\x84"});
  EXPECT_EQ(unknown.code, 2);
  EXPECT_TRUE(contains(unknown.err, "U+1F984")) << unknown.err;

  EXPECT_EQ(run({"index", "--catalog", cat, "--corpus", p("d/test.emjc"), "--scorer", "fused", "--out",
                 p("j.emjx")})
                .code,
            1);
  EXPECT_EQ(run({"eval", "--catalog", cat, "--corpus", p("d/test.emjc"), "--text-model", p("nope.emjt")}).code, 2);
}

}  // namespace
}  // namespace emojimodal
