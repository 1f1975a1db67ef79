#include <gtest/gtest.h>

#include <sstream>

#include <json.hpp>

#include "llmie/cli.hpp"
#include "llmie/datamodel.hpp"
#include "llmie/prompting.hpp"
#include "support.hpp"

namespace llmie {
namespace {

using nlohmann::json;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size()))
    text.replace(pos, from.size(), to);
  return text;
}

std::vector<std::string> pipeline_args(const std::string& input, const std::string& output) {
  return {"extract", "--engine", "scripted", "--script", test::fixture("pipeline/script.json").string(),
          "--template", test::fixture("pipeline/frame.pt.txt").string(), "--input", input, "--output", output,
          "--relations", "--relation-template", test::fixture("pipeline/relation.pt.txt").string(), "--relation-mode",
          "multiclass", "--filter", test::fixture("pipeline/filter.json").string()};
}

TEST(CliExtract, PipelineMatchesGoldenDocument) {
  test::TempDir dir;
  const auto r = run_cli(pipeline_args(test::fixture("pipeline/clinic_note.txt").string(), dir.path().string()));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "clinic_note: 7 frames, 3 relations\n");
  EXPECT_EQ(test::read_file(dir / "clinic_note.llmie"), test::read_file(test::fixture("pipeline/clinic_note.golden.llmie").string()));

  const auto manifest = json::parse(test::read_file(dir / "manifest.json"));
  EXPECT_EQ(manifest["engine"]["kind"], "scripted");
  EXPECT_EQ(manifest["template"]["sha256"].get<std::string>().size(), 64u);
  EXPECT_EQ(manifest["counts"]["documents"], 1);
  EXPECT_EQ(manifest["counts"]["frames"], 7);
  EXPECT_EQ(manifest["counts"]["relations"], 3);
  // One frame call plus one per Condition-Drug or ADE-Drug pair: 3 drugs x (3 conditions + 1 ADE) = 12.
  EXPECT_EQ(manifest["counts"]["llm_calls"], 13);
  EXPECT_EQ(manifest["relations"]["mode"], "multiclass");
}

TEST(CliExtract, TemplateDigestIsSha256OfTheFile) {
  test::TempDir dir;
  test::write_file(dir / "t.txt", "abc {{input}}");
  test::write_file(dir / "in" / "a.txt", "x");
  test::write_file(dir / "script.json", R"([{"match":"","response":"[]"}])");
  const auto r = run_cli({"extract", "--engine", "scripted", "--script", (dir / "script.json").string(), "--template",
                          (dir / "t.txt").string(), "--input", (dir / "in").string(), "--output",
                          (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto manifest = json::parse(test::read_file(dir / "out" / "manifest.json"));
  // sha256("abc {{input}}") computed with coreutils sha256sum.
  EXPECT_EQ(manifest["template"]["sha256"], "d4f60b2ed1d9b827150916ee18c7584d2157d3ce8d25d1ad966749877bde1bdf");
}

TEST(CliExtract, UsageErrorsExit64) {
  test::TempDir dir;
  auto r = run_cli({"extract", "--engine", "scripted", "--input", "x", "--output", (dir / "o").string()});
  EXPECT_EQ(r.code, 64);
  EXPECT_NE(r.err.find("--template"), std::string::npos);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 64);
  EXPECT_EQ(run_cli({}).code, 64);
  EXPECT_EQ(run_cli({"--help"}).code, 0);

  test::write_file(dir / "t.txt", "no slot");
  test::write_file(dir / "a.txt", "x");
  r = run_cli({"extract", "--engine", "scripted", "--template", (dir / "t.txt").string(), "--input",
               (dir / "a.txt").string(), "--output", (dir / "o").string()});
  EXPECT_EQ(r.code, 64);
  auto args = pipeline_args((dir / "a.txt").string(), (dir / "o").string());
  args.erase(args.end() - 2, args.end());
  EXPECT_EQ(run_cli(args).code, 64);
}

TEST(CliExtract, UnreachableEngineExits69) {
  test::TempDir dir;
  test::write_file(dir / "t.txt", "{{input}}");
  test::write_file(dir / "a.txt", "x");
  const auto r = run_cli({"extract", "--engine", "openai", "--base-url", "http://127.0.0.1:1/v1", "--model", "m",
                          "--template", (dir / "t.txt").string(), "--input", (dir / "a.txt").string(), "--output",
                          (dir / "o").string()});
  EXPECT_EQ(r.code, 69);
  EXPECT_NE(r.err.find("unreachable"), std::string::npos);
}

TEST(CliExtract, PerDocumentFailureExits2) {
  test::TempDir dir;
  test::write_file(dir / "t.txt", "{{input}}");
  test::write_file(dir / "in" / "good.txt", "Aspirin");
  test::write_file(dir / "in" / "bad.txt", "Nothing");
  test::write_file(dir / "s.json", R"([{"match":"Aspirin","response":"[{\"entity_text\":\"Aspirin\"}]"}])");
  const auto r = run_cli({"extract", "--engine", "scripted", "--script", (dir / "s.json").string(), "--template",
                          (dir / "t.txt").string(), "--input", (dir / "in").string(), "--output",
                          (dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  const auto manifest = json::parse(test::read_file(dir / "o" / "manifest.json"));
  EXPECT_EQ(manifest["counts"]["failed_documents"], 1);
  EXPECT_EQ(manifest["counts"]["frames"], 1);
  EXPECT_TRUE(manifest["documents"][0].contains("error"));
  EXPECT_TRUE(std::filesystem::exists(dir / "o" / "good.llmie"));
}

TEST(CliEval, IdenticalDirectoriesScorePerfectly) {
  test::TempDir dir;
  std::filesystem::create_directories(dir / "gold");
  std::filesystem::copy_file(test::fixture("pipeline/clinic_note.golden.llmie").string(), dir / "gold" / "clinic_note.llmie");
  const auto r = run_cli({"eval", "--gold", (dir / "gold").string(), "--pred", (dir / "gold").string(), "--relations",
                          "--attributes", "Assertion,Dosage", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_DOUBLE_EQ(j["ner"]["f1"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(j["relations"]["f1"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(j["ner"]["per_attribute_accuracy"]["Assertion"].get<double>(), 1.0);

  const auto text = run_cli({"eval", "--gold", (dir / "gold").string(), "--pred", (dir / "gold").string()});
  EXPECT_EQ(text.code, 0);
  EXPECT_NE(text.out.find("1.0000"), std::string::npos);
}

TEST(CliEval, DisjointDocIdsExit65) {
  test::TempDir dir;
  std::filesystem::create_directories(dir / "gold");
  std::filesystem::create_directories(dir / "pred");
  save(IEDocument("a", "x"), dir / "gold" / "a.llmie");
  save(IEDocument("b", "x"), dir / "pred" / "b.llmie");
  const auto r = run_cli({"eval", "--gold", (dir / "gold").string(), "--pred", (dir / "pred").string()});
  EXPECT_EQ(r.code, 65);
  EXPECT_EQ(run_cli({"eval", "--gold", (dir / "nope").string(), "--pred", (dir / "pred").string()}).code, 64);
}

TEST(CliChat, TranscriptMatchesGolden) {
  test::TempDir dir;
  const auto session = replace_all(test::read_file(test::fixture("chat/session.txt").string()), "@DIR@", dir.path().string());
  const auto r = run_cli({"chat", "--engine", "scripted", "--script", test::fixture("chat/script.json").string()}, session);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto golden =
      replace_all(test::read_file(test::fixture("chat/transcript.golden.txt").string()), "@DIR@", dir.path().string());
  EXPECT_EQ(r.out, golden);
  EXPECT_FALSE(std::filesystem::exists(dir / "early.pt.txt"));
  const auto saved = load_template((dir / "drug.pt.txt").string());
  EXPECT_EQ(saved.placeholders(), std::vector<std::string>{"input"});
}

TEST(CliChat, EngineErrorsDoNotEndTheSession) {
  const auto r = run_cli({"chat", "--engine", "scripted", "--script", test::fixture("chat/script.json").string(), "--extractor",
                          "nope"});
  EXPECT_EQ(r.code, 64);
  test::TempDir dir;
  test::write_file(dir / "s.json", R"([{"match":"zebra crossing","response":"ok"}])");
  const auto s = run_cli({"chat", "--engine", "scripted", "--script", (dir / "s.json").string()}, "hello\nzebra crossing\n");
  EXPECT_EQ(s.code, 0);
  EXPECT_NE(s.err.find("error:"), std::string::npos);
  EXPECT_EQ(s.out, "assistant> ok\n");
}

TEST(CliRender, WritesHtml) {
  test::TempDir dir;
  const auto r = run_cli({"render", "--input", test::fixture("pipeline/clinic_note.golden.llmie").string(), "--output",
                          (dir / "note.html").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto html = test::read_file(dir / "note.html");
  EXPECT_EQ(test::html_wellformed(html), "");
  EXPECT_EQ(test::element_text(html, "llmie-doc"), test::read_file(test::fixture("pipeline/clinic_note.txt").string()));
  EXPECT_EQ(run_cli({"render", "--input", (dir / "missing.llmie").string(), "--output", "x"}).code, 64);
}

}  // namespace
}  // namespace llmie
