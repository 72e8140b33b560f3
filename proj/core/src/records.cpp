#include "polyforge/records.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "polyforge/error.hpp"
#include "text_util.hpp"

namespace polyforge {
namespace {

constexpr std::array<std::pair<InstructionSource, std::string_view>, 6> kInstructionSources{{
    {InstructionSource::kAlpacaGpt4En, "alpaca-gpt4-en"},
    {InstructionSource::kAlpacaGpt4Zh, "alpaca-gpt4-zh"},
    {InstructionSource::kPostTranslation, "post-translation"},
    {InstructionSource::kPostOutput, "post-output"},
    {InstructionSource::kUserCentered, "user-centered"},
    {InstructionSource::kOther, "other"},
}};

constexpr std::array<std::pair<ConversationSource, std::string_view>, 3> kConversationSources{{
    {ConversationSource::kShareGpt, "sharegpt"},
    {ConversationSource::kDiscord, "discord"},
    {ConversationSource::kOther, "other"},
}};

}  // namespace

LanguageTag::LanguageTag(std::string_view code) {
  if (!is_valid(code)) {
    fail(Errc::kBadLanguage, "'" + std::string(code) + "' is not a two-letter ISO 639-1 code");
  }
  code_ = std::string(code);
}

bool LanguageTag::is_valid(std::string_view code) noexcept {
  return code.size() == 2 &&
         std::all_of(code.begin(), code.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

std::string_view to_string(InstructionSource source) noexcept {
  for (const auto& [value, label] : kInstructionSources) {
    if (value == source) return label;
  }
  return "other";
}

std::string_view to_string(ConversationSource source) noexcept {
  for (const auto& [value, label] : kConversationSources) {
    if (value == source) return label;
  }
  return "other";
}

std::string_view to_string(Speaker speaker) noexcept {
  return speaker == Speaker::kHuman ? "human" : "assistant";
}

std::optional<InstructionSource> parse_instruction_source(std::string_view label) noexcept {
  for (const auto& [value, name] : kInstructionSources) {
    if (name == label) return value;
  }
  return std::nullopt;
}

std::optional<ConversationSource> parse_conversation_source(std::string_view label) noexcept {
  for (const auto& [value, name] : kConversationSources) {
    if (name == label) return value;
  }
  return std::nullopt;
}

std::optional<Speaker> parse_speaker(std::string_view label) noexcept {
  if (label == "human") return Speaker::kHuman;
  if (label == "assistant") return Speaker::kAssistant;
  return std::nullopt;
}

const std::string& record_id(const Record& record) noexcept {
  return std::visit([](const auto& r) -> const std::string& { return r.id; }, record);
}

const LanguageTag& record_language(const Record& record) noexcept {
  return std::visit([](const auto& r) -> const LanguageTag& { return r.language; }, record);
}

std::string_view record_source_label(const Record& record) noexcept {
  return std::visit([](const auto& r) { return to_string(r.source); }, record);
}

void validate(const InstructionRecord& record) {
  if (detail::trim(record.instruction).empty()) {
    fail(Errc::kMissingField, "record '" + record.id + "' has an empty instruction");
  }
  if (record.language.empty()) {
    fail(Errc::kMissingField, "record '" + record.id + "' has no language");
  }
}

bool alternates(const std::vector<Turn>& turns) noexcept {
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const Speaker expected = (i % 2 == 0) ? Speaker::kHuman : Speaker::kAssistant;
    if (turns[i].speaker != expected) return false;
  }
  return true;
}

void validate(const ConversationRecord& record) {
  if (record.turns.empty()) {
    fail(Errc::kEmptyConversation, "conversation '" + record.id + "' has no turns");
  }
  for (const auto& turn : record.turns) {
    if (turn.text.empty()) {
      fail(Errc::kMalformedLine, "conversation '" + record.id + "' has an empty turn");
    }
  }
  if (!alternates(record.turns)) {
    fail(Errc::kMalformedLine,
         "conversation '" + record.id + "' does not alternate human/assistant starting with human");
  }
  if (record.language.empty()) {
    fail(Errc::kMissingField, "conversation '" + record.id + "' has no language");
  }
}

void Corpus::add(Record record) {
  const std::string& id = record_id(record);
  if (ids_.contains(id)) fail(Errc::kDuplicateId, "id '" + id + "' already in corpus");
  ids_.insert(id);
  ++manifest_[std::string(record_source_label(record))];
  records_.push_back(std::move(record));
}

bool Corpus::contains(std::string_view id) const { return ids_.find(id) != ids_.end(); }

std::map<std::string, std::size_t, std::less<>> Corpus::recount() const {
  std::map<std::string, std::size_t, std::less<>> counts;
  for (const auto& r : records_) ++counts[std::string(record_source_label(r))];
  return counts;
}

}  // namespace polyforge
