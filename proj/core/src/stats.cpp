#include "polyforge/stats.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "polyforge/error.hpp"

namespace polyforge {
namespace {

// Row order follows the source enums: instruction sets, then conversations.
int label_rank(std::string_view label) {
  static constexpr std::string_view kOrder[] = {
      "alpaca-gpt4-en", "alpaca-gpt4-zh", "post-translation", "post-output",
      "user-centered",  "sharegpt",       "discord",          "other"};
  for (std::size_t i = 0; i < std::size(kOrder); ++i) {
    if (kOrder[i] == label) return static_cast<int>(i);
  }
  return static_cast<int>(std::size(kOrder));
}

void finish(StatsRow& row) {
  row.avg_tokens_per_sample = row.samples ? static_cast<double>(row.total_tokens) / row.samples : 0.0;
  row.avg_tokens_per_turn = row.turns ? static_cast<double>(row.total_tokens) / row.turns : 0.0;
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::uint64_t record_tokens(const Record& record, const TokenizerId& tokenizer) {
  if (const auto* ins = std::get_if<InstructionRecord>(&record)) {
    return count_tokens(ins->instruction, tokenizer) + count_tokens(ins->input, tokenizer) +
           count_tokens(ins->output, tokenizer);
  }
  std::uint64_t total = 0;
  for (const auto& t : std::get<ConversationRecord>(record).turns) total += count_tokens(t.text, tokenizer);
  return total;
}

StatsTable dataset_statistics(const Corpus& corpus, const TokenizerId& tokenizer) {
  if (corpus.empty()) fail(Errc::kEmptyCorpus, "cannot compute statistics of an empty corpus");
  if (!TokenizerRegistry::global().contains(tokenizer)) {
    fail(Errc::kUnknownTokenizer, "no tokenizer named '" + tokenizer.name + "'");
  }

  std::map<std::string, StatsRow, std::less<>> by_label;
  StatsTable table;
  table.all.label = "ALL";
  for (const auto& record : corpus.records()) {
    const std::string label(record_source_label(record));
    auto& row = by_label[label];
    row.label = label;
    const std::size_t turns =
        std::holds_alternative<InstructionRecord>(record) ? 1 : std::get<ConversationRecord>(record).turns.size();
    const std::uint64_t tokens = record_tokens(record, tokenizer);
    row.samples += 1;
    row.turns += turns;
    row.total_tokens += tokens;
    table.all.samples += 1;
    table.all.turns += turns;
    table.all.total_tokens += tokens;
  }
  for (auto& [_, row] : by_label) {
    finish(row);
    table.rows.push_back(row);
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const auto& a, const auto& b) { return label_rank(a.label) < label_rank(b.label); });
  finish(table.all);
  return table;
}

std::string format_statistics(const StatsTable& table, StatsFormat format) {
  std::vector<StatsRow> rows = table.rows;
  rows.push_back(table.all);
  std::string out;
  if (format == StatsFormat::kTsv) {
    out = "dataset\tsamples\tturns\ttotal_tokens\tavg_tokens_per_sample\tavg_tokens_per_turn\n";
    for (const auto& r : rows) {
      out += r.label + '\t' + std::to_string(r.samples) + '\t' + std::to_string(r.turns) + '\t' +
             std::to_string(r.total_tokens) + '\t' + fixed2(r.avg_tokens_per_sample) + '\t' +
             fixed2(r.avg_tokens_per_turn) + '\n';
    }
    return out;
  }

  std::size_t width = 7;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  char line[256];
  std::snprintf(line, sizeof line, "%-*s %10s %10s %20s %18s\n", static_cast<int>(width), "Dataset", "Samples",
                "Turns", "Avg. tokens/sample", "Avg. tokens/turn");
  out += line;
  out += std::string(width + 62, '-') + '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (i + 1 == rows.size()) out += std::string(width + 62, '-') + '\n';
    std::snprintf(line, sizeof line, "%-*s %10zu %10zu %20s %18s\n", static_cast<int>(width), r.label.c_str(),
                  r.samples, r.turns, fixed2(r.avg_tokens_per_sample).c_str(),
                  fixed2(r.avg_tokens_per_turn).c_str());
    out += line;
  }
  return out;
}

}  // namespace polyforge
