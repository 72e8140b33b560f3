#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "polyforge/records.hpp"

namespace polyforge {

class LanguageRegistry;

// Line-delimited record interchange. One JSON object per line, UTF-8, LF
// terminated. Instruction lines carry id/instruction/language/source and
// optional role/input/output; conversation lines carry id/language/source/turns.
//
// When a registry is passed, every language tag must also be registered.

InstructionRecord parse_instruction_line(std::string_view line,
                                         const LanguageRegistry* registry = nullptr);
ConversationRecord parse_conversation_line(std::string_view line,
                                           const LanguageRegistry* registry = nullptr);
/// Dispatches on the presence of a "turns" key.
Record parse_record_line(std::string_view line, const LanguageRegistry* registry = nullptr);

/// Canonical single-line form (no trailing newline): fixed key order, empty
/// optional fields omitted, unknown fields dropped.
std::string serialize(const InstructionRecord& record);
std::string serialize(const ConversationRecord& record);
std::string serialize(const Record& record);

/// Reads a corpus file; blank lines are skipped. Errors name the line number.
Corpus load_corpus(const std::filesystem::path& path, const LanguageRegistry* registry = nullptr);
std::vector<InstructionRecord> load_instructions(const std::filesystem::path& path,
                                                 const LanguageRegistry* registry = nullptr);
std::vector<ConversationRecord> load_conversations(const std::filesystem::path& path,
                                                   const LanguageRegistry* registry = nullptr);

template <class Range>
std::string serialize_lines(const Range& records) {
  std::string out;
  for (const auto& r : records) {
    out += serialize(r);
    out += '\n';
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

struct ImportResult {
  std::vector<ConversationRecord> conversations;
  std::size_t dropped_empty = 0;
  std::size_t dropped_assistant_first = 0;
  std::size_t merged_turns = 0;

  std::size_t dropped() const noexcept { return dropped_empty + dropped_assistant_first; }
};

/// Drops blank turns and merges runs of same-speaker turns with a blank line
/// between them. Returns the number of merges performed.
std::size_t repair_turns(std::vector<Turn>& turns);

/// Reads a ShareGPT raw export: a JSON array of {id, conversations: [{from, value}]}.
/// "human"/"user" map to human, "gpt"/"chatgpt"/"assistant"/"bard"/"bing"
/// to assistant, "system" turns are skipped. Conversations left empty, or
/// starting with the assistant after repair, are dropped and counted.
/// A per-conversation "lang"/"language" field overrides `default_language`.
ImportResult parse_sharegpt_export(std::string_view document, const LanguageTag& default_language);

/// Reads a Discord channel dump: a JSON array of {prompt, response, timestamp}
/// with an optional "conversation_id". Items sharing a conversation id form
/// one multi-turn conversation ordered by timestamp; items without one are
/// single-exchange conversations.
ImportResult parse_discord_export(std::string_view document, const LanguageTag& default_language);

}  // namespace polyforge
