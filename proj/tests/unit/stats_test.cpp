#include "doctest.h"

#include <cmath>
#include <map>

#include "polyforge/corpus_io.hpp"
#include "polyforge/error.hpp"
#include "polyforge/rng.hpp"
#include "polyforge/stats.hpp"
#include "polyforge/tokenizer.hpp"
#include "test_support.hpp"

using namespace polyforge;
using namespace polyforge::testing;

namespace {

InstructionRecord words_record(const std::string& id, std::size_t words, InstructionSource source) {
  InstructionRecord r;
  r.id = id;
  for (std::size_t i = 0; i < words; ++i) r.instruction += i ? " w" : "w";
  r.language = LanguageTag("en");
  r.source = source;
  return r;
}

const StatsRow& row(const StatsTable& t, const std::string& label) {
  for (const auto& r : t.rows) {
    if (r.label == label) return r;
  }
  FAIL("no row " << label);
  return t.all;
}

void check_identities(const StatsRow& r) {
  const double total = static_cast<double>(r.total_tokens);
  CHECK(std::abs(r.avg_tokens_per_sample * static_cast<double>(r.samples) - total) < 1e-6);
  CHECK(std::abs(r.avg_tokens_per_turn * static_cast<double>(r.turns) - total) < 1e-6);
  CHECK(r.turns >= r.samples);
}

}  // namespace

TEST_SUITE("tokenizer") {
  TEST_CASE("hand-segmented examples") {
    CHECK(count_unicode_words("") == 0);
    CHECK(count_unicode_words("Hello, world") == 3);
    CHECK(count_unicode_words("你好") == 2);
    CHECK(count_unicode_words("   ") == 0);
    CHECK(count_unicode_words("don't stop") == 4);
    CHECK(count_unicode_words("GPT-4 is here!") == 6);
    CHECK(count_unicode_words("ひらがな") == 4);
    CHECK(count_unicode_words("naïve café") == 2);
    CHECK(count_unicode_words("Phoenix说你好.") == 5);
  }

  TEST_CASE("bytes over four rounds up") {
    CHECK(count_bytes_div_4("") == 0);
    CHECK(count_bytes_div_4("a") == 1);
    CHECK(count_bytes_div_4("abcd") == 1);
    CHECK(count_bytes_div_4("abcde") == 2);
  }

  TEST_CASE("unknown tokenizers are rejected and new ones can be registered") {
    try {
      count_tokens("x", TokenizerId{"nope"});
      FAIL("expected UnknownTokenizer");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kUnknownTokenizer);
    }
    TokenizerRegistry reg;
    reg.add("chars", [](std::string_view s) { return s.size(); });
    CHECK(reg.count("abc", TokenizerId{"chars"}) == 3);
    CHECK(reg.contains(TokenizerId::unicode_words()));
  }

  TEST_CASE("property: counts of a concatenation dominate its parts") {
    static const char* pieces[] = {"alpha", " ", "你", ",", "好", "beta", "!", "\n", "x1", "é", "—", "ok"};
    SeededRng rng(11);
    for (int i = 0; i < 500; ++i) {
      std::string a, b;
      for (std::size_t k = rng.uniform_index(12); k > 0; --k) a += pieces[rng.uniform_index(12)];
      for (std::size_t k = rng.uniform_index(12); k > 0; --k) b += pieces[rng.uniform_index(12)];
      for (const auto& id : {TokenizerId::unicode_words(), TokenizerId::bytes_div_4()}) {
        const auto ab = count_tokens(a + b, id);
        CHECK(ab >= count_tokens(a, id));
        CHECK(ab >= count_tokens(b, id));
      }
    }
  }

  TEST_CASE("word tokens drop punctuation and fold ASCII case") {
    CHECK(word_tokens("List THREE colors.") == std::vector<std::string>{"list", "three", "colors"});
  }
}

TEST_SUITE("stats") {
  TEST_CASE("two single-turn records of 10 and 20 tokens") {
    Corpus c;
    c.add(words_record("a", 10, InstructionSource::kAlpacaGpt4En));
    c.add(words_record("b", 20, InstructionSource::kAlpacaGpt4En));
    const auto t = dataset_statistics(c, TokenizerId::unicode_words());
    const auto& r = row(t, "alpaca-gpt4-en");
    CHECK(r.samples == 2);
    CHECK(r.turns == 2);
    CHECK(r.avg_tokens_per_sample == 15.0);
    CHECK(r.avg_tokens_per_turn == 15.0);
  }

  TEST_CASE("ALL is pooled and token-weighted, not a mean of rows") {
    Corpus c;
    c.add(words_record("a", 10, InstructionSource::kAlpacaGpt4En));
    for (int i = 0; i < 3; ++i) c.add(words_record("b" + std::to_string(i), 30, InstructionSource::kPostOutput));
    const auto t = dataset_statistics(c, TokenizerId::unicode_words());
    CHECK(t.all.label == "ALL");
    CHECK(t.all.samples == 4);
    CHECK(t.all.total_tokens == 100);
    CHECK(t.all.avg_tokens_per_sample == 25.0);
    CHECK(t.all.avg_tokens_per_sample != (10.0 + 30.0) / 2);
  }

  TEST_CASE("a four-turn conversation has avg/sample four times avg/turn") {
    ConversationRecord conv;
    conv.id = "c";
    conv.language = LanguageTag("en");
    conv.source = ConversationSource::kShareGpt;
    conv.turns = {{Speaker::kHuman, "a b c"}, {Speaker::kAssistant, "d e f g h"},
                  {Speaker::kHuman, "i"}, {Speaker::kAssistant, "j k l m n o p"}};
    Corpus c;
    c.add(conv);
    const auto t = dataset_statistics(c, TokenizerId::unicode_words());
    const auto& r = row(t, "sharegpt");
    CHECK(r.turns == 4);
    CHECK(r.avg_tokens_per_sample == doctest::Approx(4 * r.avg_tokens_per_turn));
  }

  TEST_CASE("the published ShareGPT row obeys avg/sample = avg/turn x turns/samples") {
    // 90K samples, 655K turns, 3835.30 tokens/sample, 527.06 tokens/turn.
    const double implied = 527.06 * 655.0 / 90.0;
    CHECK(std::abs(implied - 3835.30) / 3835.30 < 0.001);
  }

  TEST_CASE("identities hold on every row of the 500-record mixed fixture") {
    const auto corpus = load_corpus(fixture("stats/mixed500.jsonl"));
    REQUIRE(corpus.size() == 500);
    const auto t = dataset_statistics(corpus, TokenizerId::unicode_words());
    std::size_t samples = 0, turns = 0;
    std::uint64_t tokens = 0;
    for (const auto& r : t.rows) {
      check_identities(r);
      samples += r.samples;
      turns += r.turns;
      tokens += r.total_tokens;
    }
    check_identities(t.all);
    CHECK(t.all.samples == samples);
    CHECK(t.all.turns == turns);
    CHECK(t.all.total_tokens == tokens);
    CHECK(t.rows.size() >= 4);
  }

  TEST_CASE("rows recompute from the raw records") {
    const auto corpus = load_corpus(fixture("stats/mixed500.jsonl"));
    std::map<std::string, std::uint64_t> tokens;
    std::map<std::string, std::size_t> turns;
    for (const auto& rec : corpus.records()) {
      const std::string label(record_source_label(rec));
      if (const auto* ir = std::get_if<InstructionRecord>(&rec)) {
        tokens[label] += count_unicode_words(ir->instruction) + count_unicode_words(ir->input) +
                         count_unicode_words(ir->output);
        turns[label] += 1;
      } else {
        for (const auto& turn : std::get<ConversationRecord>(rec).turns) tokens[label] += count_unicode_words(turn.text);
        turns[label] += std::get<ConversationRecord>(rec).turns.size();
      }
    }
    const auto t = dataset_statistics(corpus, TokenizerId::unicode_words());
    for (const auto& r : t.rows) {
      CHECK(r.total_tokens == tokens[r.label]);
      CHECK(r.turns == turns[r.label]);
    }
  }

  TEST_CASE("ShareGPT-shaped fixture keeps the table's row structure") {
    const auto corpus = load_corpus(fixture("stats/sharegpt_shaped.jsonl"));
    const auto t = dataset_statistics(corpus, TokenizerId::unicode_words());
    const auto& r = row(t, "sharegpt");
    const double ratio = static_cast<double>(r.turns) / static_cast<double>(r.samples);
    CHECK(std::abs(r.avg_tokens_per_sample - r.avg_tokens_per_turn * ratio) < 1e-6);
    CHECK(ratio > 6.0);
    CHECK(ratio < 10.0);
  }

  TEST_CASE("empty corpus is an error") {
    try {
      dataset_statistics(Corpus{}, TokenizerId::unicode_words());
      FAIL("expected EmptyCorpus");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kEmptyCorpus);
    }
  }

  TEST_CASE("formatted tables round averages to two decimals") {
    Corpus c;
    c.add(words_record("a", 1, InstructionSource::kAlpacaGpt4En));
    c.add(words_record("b", 2, InstructionSource::kAlpacaGpt4En));
    c.add(words_record("c", 2, InstructionSource::kAlpacaGpt4En));
    const auto tsv = format_statistics(dataset_statistics(c, TokenizerId::unicode_words()), StatsFormat::kTsv);
    CHECK(tsv.find("1.67") != std::string::npos);
    CHECK(tsv.find("ALL") != std::string::npos);
  }
}
