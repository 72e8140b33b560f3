#include "doctest.h"

#include <cstdio>
#include <string>

#include "json.hpp"
#include "polyforge/corpus_io.hpp"
#include "polyforge/error.hpp"
#include "polyforge/languages.hpp"
#include "polyforge/rng.hpp"
#include "polyforge/split.hpp"
#include "test_support.hpp"

using namespace polyforge;
using namespace polyforge::testing;

namespace {

// Written without the JSON library so the canonical form is checked against
// something other than the code that produces it.
std::string quote(const std::string& s) {
  std::string out = "\"";
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out + "\"";
}

std::string canonical_instruction(const nlohmann::json& j) {
  auto field = [&](const char* key) { return j.contains(key) ? j[key].get<std::string>() : std::string{}; };
  std::string out = "{\"id\":" + quote(field("id"));
  if (!field("role").empty()) out += ",\"role\":" + quote(field("role"));
  out += ",\"instruction\":" + quote(field("instruction"));
  if (!field("input").empty()) out += ",\"input\":" + quote(field("input"));
  if (!field("output").empty()) out += ",\"output\":" + quote(field("output"));
  out += ",\"language\":" + quote(field("language"));
  out += ",\"source\":" + quote(field("source")) + "}";
  return out;
}

ConversationRecord random_conversation(SeededRng& rng, std::size_t index) {
  static const char* words[] = {"alpha", "beta", "gamma", "delta", "river", "mountain", "quick", "slow",
                                "你", "好", "tea", "book", "light", "window", "!", ","};
  ConversationRecord c;
  c.id = "conv-" + std::to_string(index);
  c.language = LanguageTag("en");
  c.source = ConversationSource::kShareGpt;
  const std::size_t pairs = 1 + rng.uniform_index(10);
  const bool ends_with_human = rng.bernoulli(0.2);
  for (std::size_t p = 0; p < pairs; ++p) {
    for (auto speaker : {Speaker::kHuman, Speaker::kAssistant}) {
      if (speaker == Speaker::kAssistant && ends_with_human && p + 1 == pairs) break;
      std::string text;
      const std::size_t n = 1 + rng.uniform_index(speaker == Speaker::kHuman ? 40 : 150);
      for (std::size_t w = 0; w < n; ++w) text += std::string(w ? " " : "") + words[rng.uniform_index(16)];
      c.turns.push_back({speaker, text});
    }
  }
  return c;
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("empty role is a legal instruction record") {
    auto r = parse_instruction_line(
        R"({"id":"x","role":"","instruction":"List three colors","language":"en","source":"other"})");
    CHECK(r.role.empty());
    CHECK(r.instruction == "List three colors");
    CHECK(r.language.str() == "en");
  }

  TEST_CASE("blank instruction is a missing field") {
    try {
      parse_instruction_line(R"({"id":"x","instruction":"","language":"en","source":"other"})");
      FAIL("expected MissingField");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kMissingField);
    }
    try {
      parse_instruction_line(R"({"id":"x","instruction":"hi","source":"other"})");
      FAIL("expected MissingField");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kMissingField);
    }
  }

  TEST_CASE("malformed lines and bad tags are rejected with their codes") {
    auto code_of = [](const char* line) {
      try {
        parse_instruction_line(line);
      } catch (const Error& e) {
        return e.code();
      }
      return Errc::kIo;
    };
    CHECK(code_of("not json") == Errc::kMalformedLine);
    CHECK(code_of(R"({"id":"x","instruction":"a","language":"EN","source":"other"})") == Errc::kBadLanguage);
    CHECK(code_of(R"({"id":"x","instruction":"a","language":"eng","source":"other"})") == Errc::kBadLanguage);
  }

  TEST_CASE("registry membership is enforced when a registry is given") {
    const auto reg = LanguageRegistry::parse("en\tEnglish\t10\n");
    CHECK_THROWS_AS(parse_instruction_line(R"({"id":"x","instruction":"a","language":"qq","source":"other"})", &reg),
                    Error);
    CHECK_NOTHROW(parse_instruction_line(R"({"id":"x","instruction":"a","language":"en","source":"other"})", &reg));
  }

  TEST_CASE("serialize(parse(line)) equals the independently built canonical line") {
    const std::string text = slurp(fixture("corpus/instructions_raw.jsonl"));
    std::size_t lines = 0;
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      const std::string line = text.substr(start, end - start);
      start = end + 1;
      if (line.empty()) continue;
      ++lines;
      const auto parsed = parse_instruction_line(line);
      const std::string expected = canonical_instruction(nlohmann::json::parse(line));
      CHECK_MESSAGE(serialize(parsed) == expected, line);
      CHECK(parse_instruction_line(serialize(parsed)) == parsed);
    }
    CHECK(lines == 50);
  }

  TEST_CASE("conversation lines round-trip") {
    SeededRng rng(7);
    for (std::size_t i = 0; i < 50; ++i) {
      const auto c = random_conversation(rng, i);
      CHECK(parse_conversation_line(serialize(c)) == c);
    }
  }

  TEST_CASE("conversation validation") {
    ConversationRecord c;
    c.id = "c";
    c.language = LanguageTag("en");
    CHECK_THROWS_AS(validate(c), Error);
    c.turns = {{Speaker::kAssistant, "hi"}};
    CHECK_THROWS_AS(validate(c), Error);
    c.turns = {{Speaker::kHuman, "hi"}, {Speaker::kHuman, "again"}};
    CHECK_THROWS_AS(validate(c), Error);
    c.turns = {{Speaker::kHuman, "hi"}, {Speaker::kAssistant, ""}};
    CHECK_THROWS_AS(validate(c), Error);
    c.turns = {{Speaker::kHuman, "hi"}, {Speaker::kAssistant, "hello"}, {Speaker::kHuman, "bye"}};
    CHECK_NOTHROW(validate(c));
  }

  TEST_CASE("corpus ids are unique and the manifest tracks every add") {
    Corpus corpus;
    SeededRng rng(3);
    const InstructionSource sources[] = {InstructionSource::kAlpacaGpt4En, InstructionSource::kPostOutput,
                                         InstructionSource::kUserCentered};
    for (int i = 0; i < 200; ++i) {
      if (rng.bernoulli(0.5)) {
        InstructionRecord r;
        r.id = "i" + std::to_string(i);
        r.instruction = "task";
        r.language = LanguageTag("en");
        r.source = sources[rng.uniform_index(3)];
        corpus.add(r);
      } else {
        corpus.add(random_conversation(rng, static_cast<std::size_t>(i)));
      }
      REQUIRE(corpus.manifest() == corpus.recount());
    }
    InstructionRecord dup;
    dup.id = "conv-1";
    dup.instruction = "x";
    dup.language = LanguageTag("en");
    if (corpus.contains("conv-1")) {
      try {
        corpus.add(dup);
        FAIL("expected DuplicateId");
      } catch (const Error& e) {
        CHECK(e.code() == Errc::kDuplicateId);
      }
    }
    CHECK(corpus.manifest() == corpus.recount());
  }
}

TEST_SUITE("sharegpt") {
  TEST_CASE("export import repairs, drops and counts") {
    const auto result = parse_sharegpt_export(slurp(fixture("corpus/sharegpt_export.json")), LanguageTag("en"));
    REQUIRE(result.conversations.size() == 3);
    CHECK(result.dropped_assistant_first == 1);
    CHECK(result.dropped_empty == 1);
    CHECK(result.merged_turns == 1);

    const auto& sg1 = result.conversations[0];
    CHECK(sg1.id == "sg-1");
    CHECK(sg1.turns.size() == 3);

    // Hand-merged: the two consecutive assistant turns joined by a blank line.
    const auto& sg2 = result.conversations[1];
    REQUIRE(sg2.turns.size() == 4);
    CHECK(sg2.turns[1].speaker == Speaker::kAssistant);
    CHECK(sg2.turns[1].text == "Soft rain on the roof\n\na quiet drum for the night\nthe garden drinks deep");

    const auto& sg5 = result.conversations[2];
    CHECK(sg5.language.str() == "zh");
    CHECK(sg5.turns.size() == 2);
    CHECK(sg5.turns[0].speaker == Speaker::kHuman);
    for (const auto& c : result.conversations) CHECK(alternates(c.turns));
  }

  TEST_CASE("two conversations of three turns keep their shape") {
    const std::string doc = R"([
      {"id":"a","conversations":[{"from":"human","value":"1"},{"from":"gpt","value":"2"},{"from":"human","value":"3"}]},
      {"id":"b","conversations":[{"from":"user","value":"1"},{"from":"assistant","value":"2"},{"from":"human","value":"3"}]}
    ])";
    const auto result = parse_sharegpt_export(doc, LanguageTag("en"));
    REQUIRE(result.conversations.size() == 2);
    CHECK(result.conversations[0].turns.size() == 3);
    CHECK(result.conversations[1].turns.size() == 3);
    CHECK(result.dropped() == 0);
  }

  TEST_CASE("a non-array document is a malformed export") {
    try {
      parse_sharegpt_export("{\"id\":1}", LanguageTag("en"));
      FAIL("expected MalformedExport");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kMalformedExport);
    }
  }

  TEST_CASE("discord threads are grouped and ordered by time") {
    const auto result = parse_discord_export(slurp(fixture("corpus/discord_export.json")), LanguageTag("en"));
    REQUIRE(result.conversations.size() >= 2);
    const ConversationRecord* thread = nullptr;
    for (const auto& c : result.conversations) {
      if (c.turns.size() == 4) thread = &c;
      CHECK(alternates(c.turns));
    }
    REQUIRE(thread != nullptr);
    CHECK(thread->turns[0].text == "How do I sort a list in C++?");
    CHECK(thread->turns[2].text == "And in Python?");
    CHECK(thread->source == ConversationSource::kDiscord);
  }
}

TEST_SUITE("split") {
  // Every word is one unicode-words token, so "w w w ..." of length n costs n.
  ConversationRecord pairs_of(std::size_t pairs, std::size_t human_tokens, std::size_t assistant_tokens) {
    auto words = [](std::size_t n) {
      std::string s;
      for (std::size_t i = 0; i < n; ++i) s += i ? " w" : "w";
      return s;
    };
    ConversationRecord c;
    c.id = "long";
    c.language = LanguageTag("en");
    for (std::size_t p = 0; p < pairs; ++p) {
      c.turns.push_back({Speaker::kHuman, words(human_tokens)});
      c.turns.push_back({Speaker::kAssistant, words(assistant_tokens)});
    }
    return c;
  }

  TEST_CASE("a conversation within budget comes back unchanged") {
    const auto c = pairs_of(2, 10, 20);
    const auto chunks = split_long_conversation(c, 2048, TokenizerId::unicode_words());
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].record == c);
    CHECK(chunks[0].tokens == 60);
    CHECK_FALSE(chunks[0].oversized);
  }

  TEST_CASE("six 500-token pairs under 2048 pack as four then two") {
    const auto chunks = split_long_conversation(pairs_of(6, 100, 400), 2048, TokenizerId::unicode_words());
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[0].record.turns.size() == 8);
    CHECK(chunks[1].record.turns.size() == 4);
    CHECK(chunks[0].tokens == 2000);
    CHECK(chunks[1].tokens == 1000);
    CHECK(chunks[0].record.id == "long#0");
    CHECK(chunks[1].record.id == "long#1");
  }

  TEST_CASE("a single pair above budget is emitted alone and flagged") {
    const auto chunks = split_long_conversation(pairs_of(1, 1000, 2000), 2048, TokenizerId::unicode_words());
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].oversized);
    CHECK(chunks[0].tokens == 3000);
  }

  TEST_CASE("budgets below the minimum are rejected") {
    CHECK_THROWS_AS(split_long_conversation(pairs_of(1, 1, 1), 31, TokenizerId::unicode_words()), Error);
  }

  TEST_CASE("property: budgets, turn conservation and alternation over random conversations") {
    SeededRng rng(2024);
    for (std::size_t i = 0; i < 200; ++i) {
      const auto c = random_conversation(rng, i);
      const std::size_t budget = 32 + rng.uniform_index(400);
      const auto chunks = split_long_conversation(c, budget, TokenizerId::unicode_words());
      std::vector<Turn> joined;
      for (const auto& ch : chunks) {
        std::size_t tokens = 0;
        for (const auto& t : ch.record.turns) tokens += count_tokens(t.text, TokenizerId::unicode_words());
        CHECK(tokens == ch.tokens);
        if (!ch.oversized) CHECK(ch.tokens <= budget);
        if (ch.oversized) CHECK(ch.record.turns.size() <= 2);
        CHECK(alternates(ch.record.turns));
        CHECK(ch.record.language == c.language);
        joined.insert(joined.end(), ch.record.turns.begin(), ch.record.turns.end());
      }
      CHECK(joined == c.turns);
    }
  }
}
