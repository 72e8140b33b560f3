#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace polyforge {

/// Two-letter lowercase ISO 639-1 code. Construction validates the syntax;
/// registry membership is checked separately by whoever holds a registry.
class LanguageTag {
 public:
  LanguageTag() = default;
  /// Throws Error(kBadLanguage) unless `code` is exactly two ASCII lowercase letters.
  explicit LanguageTag(std::string_view code);

  static bool is_valid(std::string_view code) noexcept;

  const std::string& str() const noexcept { return code_; }
  bool empty() const noexcept { return code_.empty(); }

  auto operator<=>(const LanguageTag&) const = default;

 private:
  std::string code_;
};

enum class InstructionSource {
  kAlpacaGpt4En,
  kAlpacaGpt4Zh,
  kPostTranslation,
  kPostOutput,
  kUserCentered,
  kOther,
};

enum class ConversationSource { kShareGpt, kDiscord, kOther };

enum class Speaker { kHuman, kAssistant };

std::string_view to_string(InstructionSource source) noexcept;
std::string_view to_string(ConversationSource source) noexcept;
std::string_view to_string(Speaker speaker) noexcept;
std::optional<InstructionSource> parse_instruction_source(std::string_view label) noexcept;
std::optional<ConversationSource> parse_conversation_source(std::string_view label) noexcept;
std::optional<Speaker> parse_speaker(std::string_view label) noexcept;

struct InstructionRecord {
  std::string id;
  std::string role;  // may be empty
  std::string instruction;
  std::string input;
  std::string output;
  LanguageTag language;
  InstructionSource source = InstructionSource::kOther;

  bool is_complete() const noexcept { return !output.empty(); }

  bool operator==(const InstructionRecord&) const = default;
};

struct Turn {
  Speaker speaker = Speaker::kHuman;
  std::string text;

  bool operator==(const Turn&) const = default;
};

struct ConversationRecord {
  std::string id;
  std::vector<Turn> turns;
  LanguageTag language;
  ConversationSource source = ConversationSource::kOther;

  bool operator==(const ConversationRecord&) const = default;
};

using Record = std::variant<InstructionRecord, ConversationRecord>;

const std::string& record_id(const Record& record) noexcept;
const LanguageTag& record_language(const Record& record) noexcept;
std::string_view record_source_label(const Record& record) noexcept;

/// Throws Error(kMissingField) when the instruction is blank after trimming.
void validate(const InstructionRecord& record);
/// Throws Error(kEmptyConversation) for no turns and Error(kMalformedLine)
/// for empty turn text or broken human/assistant alternation.
void validate(const ConversationRecord& record);

/// True when turns start with a human and strictly alternate.
bool alternates(const std::vector<Turn>& turns) noexcept;

/// An ordered collection of records with unique ids and a per-source
/// manifest that always matches the records held.
class Corpus {
 public:
  Corpus() = default;

  /// Throws Error(kDuplicateId) if the id is already present.
  void add(Record record);
  void add(InstructionRecord record) { add(Record(std::move(record))); }
  void add(ConversationRecord record) { add(Record(std::move(record))); }

  bool contains(std::string_view id) const;
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const std::vector<Record>& records() const noexcept { return records_; }

  /// Source label -> record count, maintained incrementally.
  const std::map<std::string, std::size_t, std::less<>>& manifest() const noexcept {
    return manifest_;
  }
  /// Manifest rebuilt from scratch; equal to manifest() by construction.
  std::map<std::string, std::size_t, std::less<>> recount() const;

 private:
  std::vector<Record> records_;
  std::set<std::string, std::less<>> ids_;
  std::map<std::string, std::size_t, std::less<>> manifest_;
};

}  // namespace polyforge
