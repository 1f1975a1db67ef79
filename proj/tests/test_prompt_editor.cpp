#include <gtest/gtest.h>

#include "llmie/prompt_editor.hpp"
#include "support.hpp"

namespace llmie {
namespace {

const GuidelineStore& store() {
  static const GuidelineStore s = GuidelineStore::load(GuidelineStore::default_directory());
  return s;
}

std::string first_code_block(const std::string& text) {
  const auto open = text.find("```");
  const auto body = text.find('\n', open) + 1;
  return text.substr(open, text.find("```", body) + 3 - open);
}

const std::string kValidReply =
    "Here is a draft.\n\n```\n# Task description\nExtract drugs.\n\n# Schema definition\nType: Drug.\n\n"
    "# Output format definition\nA JSON list.\n\n# Input\n{{input}}\n```\nLet me know.";

TEST(Guidelines, EveryKindShipsAndItsExampleIsAValidTemplate) {
  ASSERT_EQ(extractor_kinds().size(), 5u);
  for (const auto& kind : extractor_kinds()) {
    ASSERT_TRUE(store().contains(kind)) << kind;
    const auto& text = store().guideline(kind);
    ASSERT_NE(text.find("```"), std::string::npos) << kind;
    const auto tmpl = extract_template(first_code_block(text));
    EXPECT_FALSE(tmpl.placeholders().empty()) << kind;
  }
  EXPECT_THROW(store().guideline("bogus"), EditorError);
}

TEST(ChatSession, StartsWithSystemPrompt) {
  auto session = new_session(store(), "basic", test::scripted({{"", "ok"}}));
  ASSERT_EQ(session.history().size(), 1u);
  EXPECT_EQ(session.history()[0].role, Role::system);
  EXPECT_EQ(session.history()[0].content.rfind("You are an AI assistant specializing", 0), 0u);
  EXPECT_EQ(session.last_reply(), "");
  EXPECT_THROW(new_session(store(), "bogus", test::scripted({{"", "x"}})), EditorError);
}

TEST(ChatSession, FirstTurnEmbedsGuidelineOnce) {
  auto engine = test::scripted({{"", "reply"}});
  auto session = new_session(store(), "review", engine);
  EXPECT_EQ(session.chat_turn("Write a prompt for drugs"), "reply");
  ASSERT_EQ(session.history().size(), 3u);
  const auto& first = session.history()[1];
  EXPECT_EQ(first.role, Role::user);
  EXPECT_NE(first.content.find(store().guideline("review")), std::string::npos);
  EXPECT_NE(first.content.find("Write a prompt for drugs"), std::string::npos);
  EXPECT_EQ(session.history()[2].role, Role::assistant);

  session.chat_turn("Add a Frequency attribute");
  ASSERT_EQ(session.history().size(), 5u);
  EXPECT_EQ(session.history()[3].content, "Add a Frequency attribute");
  const auto sent = engine->log().snapshot().back().messages;
  std::size_t copies = 0;
  for (const auto& m : sent) copies += test::count_occurrences(m.content, store().guideline("review"));
  EXPECT_EQ(copies, 1u);
}

TEST(ChatSession, SessionsAreIndependent) {
  auto engine = test::scripted({{"", "r"}});
  auto a = new_session(store(), "basic", engine);
  auto b = new_session(store(), "sentence", engine);
  a.chat_turn("one");
  a.chat_turn("two");
  EXPECT_EQ(a.history().size(), 5u);
  EXPECT_EQ(b.history().size(), 1u);
  b.chat_turn("three");
  EXPECT_NE(b.history()[1].content.find(store().guideline("sentence")), std::string::npos);
  EXPECT_EQ(b.history()[1].content.find(store().guideline("basic")), std::string::npos);
}

TEST(ChatSession, FailedTurnLeavesHistoryUnchanged) {
  auto session = new_session(store(), "basic", test::scripted({{"only this", "r"}}));
  EXPECT_THROW(session.chat_turn("something else"), EngineError);
  EXPECT_EQ(session.history().size(), 1u);
  EXPECT_THROW(session.chat_turn(""), EditorError);
  EXPECT_EQ(session.history().size(), 1u);
  EXPECT_EQ(session.chat_turn("only this"), "r");
  EXPECT_EQ(session.history().size(), 3u);
}

TEST(ExtractTemplate, AcceptsFencedTemplate) {
  const auto tmpl = extract_template(kValidReply);
  EXPECT_EQ(tmpl.placeholders(), std::vector<std::string>{"input"});
  EXPECT_EQ(tmpl.text().rfind("# Task description", 0), 0u);
  EXPECT_EQ(tmpl.text().find("```"), std::string::npos);
}

TEST(ExtractTemplate, ReportsMissingSection) {
  std::string reply = kValidReply;
  reply.replace(reply.find("# Output format definition"), 26, "# Format");
  try {
    extract_template(reply);
    FAIL();
  } catch (const TemplateError& e) {
    EXPECT_EQ(e.kind(), TemplateError::Kind::incomplete);
    EXPECT_NE(e.subject().find("Output format"), std::string::npos);
  }
}

TEST(ExtractTemplate, ReportsMissingPlaceholder) {
  std::string reply = kValidReply;
  reply.replace(reply.find("{{input}}"), 9, "the note");
  try {
    extract_template(reply);
    FAIL();
  } catch (const TemplateError& e) {
    EXPECT_EQ(e.kind(), TemplateError::Kind::incomplete);
    EXPECT_NE(e.subject().find("placeholder"), std::string::npos);
  }
}

}  // namespace
}  // namespace llmie
