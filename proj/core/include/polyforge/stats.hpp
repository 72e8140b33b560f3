#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "polyforge/records.hpp"
#include "polyforge/tokenizer.hpp"

namespace polyforge {

struct StatsRow {
  std::string label;
  std::size_t samples = 0;
  std::size_t turns = 0;
  std::uint64_t total_tokens = 0;
  double avg_tokens_per_sample = 0.0;
  double avg_tokens_per_turn = 0.0;
};

struct StatsTable {
  std::vector<StatsRow> rows;  // one per source label, instruction sources first
  StatsRow all;                // pooled over every record, label "ALL"
};

/// Tokens of one record: instruction + input + output for instruction
/// records (one turn), sum over turns for conversations.
std::uint64_t record_tokens(const Record& record, const TokenizerId& tokenizer);

/// Per-source sample/turn/token statistics plus the pooled ALL row. Averages
/// are total tokens over samples (or turns), so ALL is token-weighted.
/// Throws Error(kEmptyCorpus).
StatsTable dataset_statistics(const Corpus& corpus, const TokenizerId& tokenizer);

enum class StatsFormat { kTable, kTsv };

/// Averages rendered with two decimals.
std::string format_statistics(const StatsTable& table, StatsFormat format);

}  // namespace polyforge
