// Records the replay caches under tests/fixtures from the deterministic
// FixtureEndpoint, then replays each one to confirm the numbers the tests
// expect. Run after changing a prompt, a request layout or the fixture plan:
//
//   polyforge_make_fixtures [fixture-dir]

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

#include "fixture_plan.hpp"
#include "polyforge/corpus_io.hpp"
#include "polyforge/judge.hpp"
#include "polyforge/languages.hpp"
#include "polyforge/synth.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace polyforge;
using namespace polyforge::testing;

namespace {

fs::path g_root;

std::string qid(const char* prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i + 1);
  return buf;
}

void check(bool ok, const std::string& what) {
  std::cout << (ok ? "ok    " : "FAIL  ") << what << "\n";
  if (!ok) std::exit(1);
}

fs::path fresh(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void record_post_translate() {
  const auto registry = LanguageRegistry::load(g_root / "languages40.tsv");
  const auto dist = build_distribution(registry);
  const auto records = load_instructions(g_root / "post_translate/records.jsonl", &registry);
  const fs::path cache = fresh(g_root / "post_translate/cache");

  for (auto mode : {CacheMode::kRecord, CacheMode::kReplay}) {
    auto endpoint = std::make_shared<FixtureEndpoint>();
    Gateway gw(cache, mode, mode == CacheMode::kRecord ? endpoint : nullptr);
    SynthContext ctx{gw, registry};
    for (auto tm : {TranslationMode::kFullTranslation, TranslationMode::kPostOutput}) {
      SeededRng rng(plan::kSeed);
      auto result = post_translate(records, dist, tm, ctx, rng);
      check(result.records.size() + result.ledger.size() == records.size() && result.ledger.size() == 1,
            "post-translate " + std::string(to_string(tm)) + " " + std::string(to_string(mode)) + ": " +
                std::to_string(result.records.size()) + " out, " + std::to_string(result.ledger.size()) +
                " ledger");
    }
  }
}

void record_expand() {
  const auto registry = LanguageRegistry::load(g_root / "languages40.tsv");
  const auto seeds = load_triplets(g_root / "expand/seeds.jsonl");
  RoleSet roles;
  {
    std::ifstream in(g_root / "expand/roles.txt");
    for (std::string line; std::getline(in, line);) roles.add(line);
  }
  const fs::path cache = fresh(g_root / "expand/cache");

  std::size_t first_accepted = 0;
  for (auto mode : {CacheMode::kRecord, CacheMode::kReplay}) {
    auto endpoint = std::make_shared<FixtureEndpoint>();
    Gateway gw(cache, mode, mode == CacheMode::kRecord ? endpoint : nullptr);
    SynthContext ctx{gw, registry};
    SeededRng rng(plan::kSeed);
    auto expansion = expand_instructions(seeds, roles, plan::kExpandPerPrompt, plan::kExpandRounds, ctx, rng);
    auto answered = predict_outputs(expansion.accepted, LanguageTag("en"), ctx);
    if (mode == CacheMode::kRecord) first_accepted = expansion.accepted.size();
    check(expansion.accepted.size() == first_accepted && answered.ledger.empty() &&
              answered.records.size() == expansion.accepted.size() && expansion.rejected_duplicates > 0,
          "expand " + std::string(to_string(mode)) + ": " + std::to_string(expansion.accepted.size()) +
              " accepted, " + std::to_string(expansion.rejected_duplicates) + " rejected, " +
              std::to_string(expansion.stalled_rounds) + " stalled");
  }
}

void record_small() {
  const auto registry = LanguageRegistry::load(g_root / "languages40.tsv");
  const auto fr = build_distribution(registry, std::vector{LanguageTag("fr")});
  const auto records = plan::three_records();
  const std::vector<ConversationRecord> convs = {plan::four_turns()};
  const fs::path cache = fresh(g_root / "synth_small/cache");

  for (auto mode : {CacheMode::kRecord, CacheMode::kReplay}) {
    auto endpoint = std::make_shared<FixtureEndpoint>();
    Gateway gw(cache, mode, mode == CacheMode::kRecord ? endpoint : nullptr);
    SynthContext ctx{gw, registry};
    const std::string tag = " " + std::string(to_string(mode));

    check(translate(gw, "Hello", LanguageTag("en"), LanguageTag("fr"), ctx.translation_config()) == "Bonjour",
          "hello" + tag);
    for (auto tm : {TranslationMode::kFullTranslation, TranslationMode::kPostOutput}) {
      SeededRng rng(plan::kSeed);
      auto r = post_translate(records, fr, tm, ctx, rng);
      check(r.records.size() == 3 && r.ledger.empty(), "three records " + std::string(to_string(tm)) + tag);
    }
    SeededRng rng(plan::kSeed);
    auto c = translate_conversations(convs, fr, ctx, rng);
    check(c.records.size() == 1 && c.records[0].turns.size() == 4, "conversation" + tag);

    endpoint->roles_reply = "teacher, lawyer, teacher";
    auto three = build_role_set(ctx.templates.roles, 3, ctx);
    check(three.roles.size() == 2 && !three.warnings.empty(), "roles of three" + tag);
    endpoint->roles_reply = "poet";
    auto one = build_role_set(ctx.templates.roles, 1, ctx);
    check(one.roles.size() == 1, "roles of one" + tag);

    auto answered = predict_outputs(plan::two_triplets(), LanguageTag("en"), ctx);
    check(answered.records.size() == 2 && answered.ledger.empty(), "two answers" + tag);
  }
}

struct Matchup {
  std::string name;
  QuestionSet questions;
  AnswerSet a;
  AnswerSet b;
  JudgeConfig judge;
  JudgeProtocol protocol;
  BiasPolicy policy;
  std::map<std::string, std::string> replies;
};

std::vector<Matchup> judge_plan() {
  const auto qs = QuestionSet::load(g_root / "judge/questions.jsonl");
  const auto phoenix = AnswerSet::load(g_root / "judge/answers_phoenix.jsonl");
  const auto chatgpt = AnswerSet::load(g_root / "judge/answers_chatgpt.jsonl");
  const auto bqs = QuestionSet::load(g_root / "judge/beat_questions.jsonl");
  const auto bphoenix = AnswerSet::load(g_root / "judge/beat_answers_phoenix.jsonl");
  const auto bchatgpt = AnswerSet::load(g_root / "judge/beat_answers_chatgpt.jsonl");

  std::vector<Matchup> out;

  Matchup ratio{"ratio cell", qs, phoenix, chatgpt, plan::ratio_judge(), JudgeProtocol::kRatio,
                BiasPolicy::kSingleOrder, {}};
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const int a = i < plan::kRatioNines ? 9 : 8;
    ratio.replies[qid("q", i) + "|a-first"] =
        std::to_string(a) + " 10\nAssistant 2 gives a more complete answer than Assistant 1.";
  }
  out.push_back(ratio);

  Matchup anchor_ratio{"ratio anchor", qs, phoenix, phoenix, plan::ratio_judge(), JudgeProtocol::kRatio,
                       BiasPolicy::kSingleOrder, {}};
  for (std::size_t i = 0; i < qs.size(); ++i) {
    anchor_ratio.replies[qid("q", i) + "|a-first"] =
        std::string(i % 2 == 0 ? "8 9" : "9 8") + "\nThe two answers are very close.";
  }
  out.push_back(anchor_ratio);

  Matchup anchor_beat{"beat anchor", qs, phoenix, phoenix, plan::beat_judge(), JudgeProtocol::kBeat,
                      BiasPolicy::kSingleOrder, {}};
  for (std::size_t i = 0; i < qs.size(); ++i) {
    anchor_beat.replies[qid("q", i) + "|a-first"] =
        std::string("Both answers cover the question.\n") +
        (i % 2 == 0 ? "Assistant 1 > Assistant 2" : "Assistant 2 > Assistant 1");
  }
  out.push_back(anchor_beat);

  Matchup beat{"beat cell", bqs, bphoenix, bchatgpt, plan::beat_judge(), JudgeProtocol::kBeat,
               BiasPolicy::kBothOrders, {}};
  const plan::BeatPlan bp;
  const std::string one = "Assistant 1 > Assistant 2";
  const std::string two = "Assistant 2 > Assistant 1";
  const std::string eq = "Assistant 1 = Assistant 2";
  std::size_t i = 0;
  auto put = [&](std::size_t n, const std::string& a_first, const std::string& b_first) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      beat.replies[qid("bq", i) + "|a-first"] = "Comparing the two answers.\n" + a_first;
      beat.replies[qid("bq", i) + "|b-first"] = "Comparing the two answers.\n" + b_first;
    }
  };
  put(bp.win_consistent, one, two);
  put(bp.win_with_tie, one, eq);
  put(bp.loss_consistent, two, one);
  put(bp.loss_with_tie, eq, one);
  put(bp.tie_position_bias, one, one);
  put(bp.tie_both, eq, eq);
  out.push_back(beat);
  return out;
}

std::string describe(const MatchupSummary& s) {
  std::string d = std::to_string(s.wins) + "/" + std::to_string(s.ties) + "/" + std::to_string(s.losses);
  if (s.performance_ratio) d += " ratio " + std::to_string(*s.performance_ratio);
  if (s.beat_rate) d += " beat " + std::to_string(*s.beat_rate);
  return d;
}

void record_judge() {
  const fs::path cache = fresh(g_root / "judge/cache");
  const auto matchups = judge_plan();
  for (auto mode : {CacheMode::kRecord, CacheMode::kReplay}) {
    for (const auto& m : matchups) {
      auto endpoint = std::make_shared<FixtureEndpoint>();
      endpoint->judge_replies = m.replies;
      Gateway gw(cache, mode, mode == CacheMode::kRecord ? endpoint : nullptr);
      auto s = run_matchup(m.questions, m.a, m.b, gw, m.judge, m.protocol, m.policy);
      bool ok = s.ledger.empty();
      if (m.name == "ratio cell") ok = ok && s.performance_ratio && std::abs(*s.performance_ratio - 85.2) < 1e-9;
      if (m.name == "ratio anchor") ok = ok && s.performance_ratio && std::abs(*s.performance_ratio - 100.0) < 1e-9;
      if (m.name == "beat anchor") ok = ok && s.beat_rate && std::abs(*s.beat_rate - 50.0) < 1e-9;
      if (m.name == "beat cell") {
        ok = ok && s.wins == 143 && s.ties == 30 && s.losses == 257 && s.beat_rate &&
             std::abs(*s.beat_rate - 35.75) < 1e-9;
      }
      check(ok, m.name + " " + std::string(to_string(mode)) + ": " + describe(s));
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  g_root = argc > 1 ? fs::path(argv[1]) : fs::path(POLYFORGE_FIXTURE_DIR);
  record_post_translate();
  record_expand();
  record_small();
  record_judge();
  return 0;
}
