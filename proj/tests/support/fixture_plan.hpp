#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "polyforge/judge.hpp"
#include "polyforge/synth.hpp"

// Settings the checked-in replay caches were recorded with. Changing any of
// them changes request fingerprints, so the caches must be re-recorded.
namespace polyforge::testing::plan {

inline constexpr std::uint64_t kSeed = 42;

inline constexpr std::size_t kPostTranslateRecords = 50;

inline constexpr std::size_t kExpandPerPrompt = 4;
inline constexpr std::size_t kExpandRounds = 8;

inline JudgeConfig ratio_judge() { return JudgeConfig{}; }

inline JudgeConfig beat_judge() {
  JudgeConfig j;
  j.model.model = "gpt-3.5-turbo";
  return j;
}

// Ratio cell: model A scores 9 on the first 52 questions and 8 on the other
// 48; the baseline always scores 10.
inline constexpr std::size_t kRatioNines = 52;

// Beat cell, per outcome: how many questions reach it through each
// combination of slot-order verdicts.
struct BeatPlan {
  std::size_t win_consistent = 120;  // A-first: A wins, B-first: A wins
  std::size_t win_with_tie = 23;     // A wins once, tie once
  std::size_t loss_consistent = 240;
  std::size_t loss_with_tie = 17;
  std::size_t tie_position_bias = 20;  // slot 1 wins both times
  std::size_t tie_both = 10;

  std::size_t total() const {
    return win_consistent + win_with_tie + loss_consistent + loss_with_tie + tie_position_bias + tie_both;
  }
};

}  // namespace polyforge::testing::plan

namespace polyforge::testing::plan {

// Inputs of the small per-operation replay fixture under synth_small/.
inline std::vector<InstructionRecord> three_records() {
  std::vector<InstructionRecord> out;
  const char* rows[][3] = {
      {"Give three tips for staying healthy.", "", "Eat well, move every day and sleep enough."},
      {"Translate the sentence into plain words.", "The meeting was postponed sine die.",
       "The meeting was put off with no new date."},
      {"Name a famous painting.", "", "The Mona Lisa."},
  };
  for (int i = 0; i < 3; ++i) {
    InstructionRecord r;
    r.id = "small-" + std::to_string(i);
    r.instruction = rows[i][0];
    r.input = rows[i][1];
    r.output = rows[i][2];
    r.language = LanguageTag("en");
    r.source = InstructionSource::kAlpacaGpt4En;
    out.push_back(std::move(r));
  }
  return out;
}

inline ConversationRecord four_turns() {
  ConversationRecord c;
  c.id = "chat-1";
  c.language = LanguageTag("en");
  c.source = ConversationSource::kShareGpt;
  c.turns = {{Speaker::kHuman, "Can you recommend a book?"},
             {Speaker::kAssistant, "Try a classic adventure novel."},
             {Speaker::kHuman, "Something shorter?"},
             {Speaker::kAssistant, "A short story collection works well."}};
  return c;
}

inline std::vector<SeedTriplet> two_triplets() {
  return {{"nurse", "Explain how to take a pulse.", ""}, {"", "Explain how to take a pulse.", ""}};
}

}  // namespace polyforge::testing::plan
