#include "polyforge/corpus_io.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include "json.hpp"

#include "polyforge/error.hpp"
#include "polyforge/languages.hpp"
#include "text_util.hpp"

namespace polyforge {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

json parse_object(std::string_view line, Errc on_error) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) fail(on_error, "not valid JSON");
  if (!j.is_object()) fail(on_error, "expected a JSON object");
  return j;
}

// Absent and null read as empty; anything other than a string is malformed.
std::string optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) fail(Errc::kMalformedLine, std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) fail(Errc::kMissingField, std::string("missing '") + key + "'");
  if (!it->is_string()) fail(Errc::kMalformedLine, std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

LanguageTag checked_language(const json& j, const LanguageRegistry* registry) {
  const std::string code = required_string(j, "language");
  if (code.empty()) fail(Errc::kMissingField, "missing 'language'");
  LanguageTag tag(code);
  if (registry != nullptr && !registry->contains(tag)) {
    fail(Errc::kBadLanguage, "'" + code + "' is not in the language registry");
  }
  return tag;
}

std::string dump(const ordered_json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

template <class T, class Parse>
std::vector<T> load_lines(const std::filesystem::path& path, Parse parse) {
  const std::string text = detail::read_file(path);
  std::vector<T> out;
  std::size_t lineno = 0;
  for (auto line : detail::split_lines(text)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(parse(line));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::optional<Speaker> sharegpt_speaker(const std::string& from) {
  const std::string f = detail::ascii_lower(from);
  if (f == "human" || f == "user") return Speaker::kHuman;
  if (f == "gpt" || f == "chatgpt" || f == "assistant" || f == "bard" || f == "bing") {
    return Speaker::kAssistant;
  }
  return std::nullopt;
}

LanguageTag language_override(const json& item, const LanguageTag& fallback) {
  for (const char* key : {"lang", "language"}) {
    auto it = item.find(key);
    if (it != item.end() && it->is_string() && LanguageTag::is_valid(it->get<std::string>())) {
      return LanguageTag(it->get<std::string>());
    }
  }
  return fallback;
}

std::string id_string(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  return {};
}

// Shared tail of both importers: repair, then keep or count the drop.
void admit(ImportResult& result, ConversationRecord conv) {
  result.merged_turns += repair_turns(conv.turns);
  if (conv.turns.empty()) {
    ++result.dropped_empty;
    return;
  }
  if (conv.turns.front().speaker != Speaker::kHuman) {
    ++result.dropped_assistant_first;
    return;
  }
  validate(conv);
  result.conversations.push_back(std::move(conv));
}

json parse_export_array(std::string_view document) {
  json doc = json::parse(document, nullptr, false);
  if (doc.is_discarded()) fail(Errc::kMalformedExport, "export is not valid JSON");
  if (!doc.is_array()) fail(Errc::kMalformedExport, "export must be a JSON array");
  return doc;
}

}  // namespace

InstructionRecord parse_instruction_line(std::string_view line, const LanguageRegistry* registry) {
  const json j = parse_object(line, Errc::kMalformedLine);
  InstructionRecord r;
  r.id = required_string(j, "id");
  if (r.id.empty()) fail(Errc::kMissingField, "empty 'id'");
  r.instruction = required_string(j, "instruction");
  if (detail::trim(r.instruction).empty()) fail(Errc::kMissingField, "empty 'instruction'");
  r.language = checked_language(j, registry);
  const std::string source = required_string(j, "source");
  auto parsed = parse_instruction_source(source);
  if (!parsed) fail(Errc::kMalformedLine, "unknown instruction source '" + source + "'");
  r.source = *parsed;
  r.role = optional_string(j, "role");
  r.input = optional_string(j, "input");
  r.output = optional_string(j, "output");
  return r;
}

ConversationRecord parse_conversation_line(std::string_view line, const LanguageRegistry* registry) {
  const json j = parse_object(line, Errc::kMalformedLine);
  ConversationRecord r;
  r.id = required_string(j, "id");
  if (r.id.empty()) fail(Errc::kMissingField, "empty 'id'");
  r.language = checked_language(j, registry);
  const std::string source = required_string(j, "source");
  auto parsed = parse_conversation_source(source);
  if (!parsed) fail(Errc::kMalformedLine, "unknown conversation source '" + source + "'");
  r.source = *parsed;
  auto turns = j.find("turns");
  if (turns == j.end()) fail(Errc::kMissingField, "missing 'turns'");
  if (!turns->is_array()) fail(Errc::kMalformedLine, "'turns' is not a list");
  for (const auto& t : *turns) {
    if (!t.is_object()) fail(Errc::kMalformedLine, "turn is not an object");
    auto speaker = parse_speaker(required_string(t, "speaker"));
    if (!speaker) fail(Errc::kMalformedLine, "turn speaker must be human or assistant");
    r.turns.push_back({*speaker, required_string(t, "text")});
  }
  validate(r);
  return r;
}

Record parse_record_line(std::string_view line, const LanguageRegistry* registry) {
  const json j = parse_object(line, Errc::kMalformedLine);
  if (j.contains("turns")) return parse_conversation_line(line, registry);
  return parse_instruction_line(line, registry);
}

std::string serialize(const InstructionRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  if (!r.role.empty()) j["role"] = r.role;
  j["instruction"] = r.instruction;
  if (!r.input.empty()) j["input"] = r.input;
  if (!r.output.empty()) j["output"] = r.output;
  j["language"] = r.language.str();
  j["source"] = std::string(to_string(r.source));
  return dump(j);
}

std::string serialize(const ConversationRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  ordered_json turns = ordered_json::array();
  for (const auto& t : r.turns) {
    ordered_json turn;
    turn["speaker"] = std::string(to_string(t.speaker));
    turn["text"] = t.text;
    turns.push_back(std::move(turn));
  }
  j["turns"] = std::move(turns);
  j["language"] = r.language.str();
  j["source"] = std::string(to_string(r.source));
  return dump(j);
}

std::string serialize(const Record& record) {
  return std::visit([](const auto& r) { return serialize(r); }, record);
}

Corpus load_corpus(const std::filesystem::path& path, const LanguageRegistry* registry) {
  Corpus corpus;
  for (auto& r : load_lines<Record>(path, [&](std::string_view l) { return parse_record_line(l, registry); })) {
    corpus.add(std::move(r));
  }
  return corpus;
}

std::vector<InstructionRecord> load_instructions(const std::filesystem::path& path,
                                                 const LanguageRegistry* registry) {
  return load_lines<InstructionRecord>(
      path, [&](std::string_view l) { return parse_instruction_line(l, registry); });
}

std::vector<ConversationRecord> load_conversations(const std::filesystem::path& path,
                                                   const LanguageRegistry* registry) {
  return load_lines<ConversationRecord>(
      path, [&](std::string_view l) { return parse_conversation_line(l, registry); });
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  detail::write_file_atomic(path, serialize_lines(corpus.records()));
}

std::size_t repair_turns(std::vector<Turn>& turns) {
  std::erase_if(turns, [](const Turn& t) { return detail::trim(t.text).empty(); });
  std::size_t merges = 0;
  std::vector<Turn> merged;
  merged.reserve(turns.size());
  for (auto& t : turns) {
    if (!merged.empty() && merged.back().speaker == t.speaker) {
      merged.back().text += "\n\n";
      merged.back().text += t.text;
      ++merges;
    } else {
      merged.push_back(std::move(t));
    }
  }
  turns = std::move(merged);
  return merges;
}

ImportResult parse_sharegpt_export(std::string_view document, const LanguageTag& default_language) {
  const json doc = parse_export_array(document);
  ImportResult result;
  std::size_t index = 0;
  for (const auto& item : doc) {
    if (!item.is_object()) fail(Errc::kMalformedExport, "export entry is not an object");
    auto convs = item.find("conversations");
    if (convs == item.end() || !convs->is_array()) {
      fail(Errc::kMalformedExport, "export entry has no 'conversations' list");
    }
    ConversationRecord conv;
    conv.id = item.contains("id") ? id_string(item["id"]) : std::string{};
    if (conv.id.empty()) conv.id = "sharegpt-" + std::to_string(index);
    conv.language = language_override(item, default_language);
    conv.source = ConversationSource::kShareGpt;
    for (const auto& turn : *convs) {
      if (!turn.is_object() || !turn.contains("from") || !turn["from"].is_string()) {
        fail(Errc::kMalformedExport, "conversation '" + conv.id + "' has a turn without 'from'");
      }
      const std::string from = turn["from"].get<std::string>();
      if (detail::ascii_lower(from) == "system") continue;
      auto speaker = sharegpt_speaker(from);
      if (!speaker) fail(Errc::kMalformedExport, "unknown speaker '" + from + "' in '" + conv.id + "'");
      auto value = turn.find("value");
      if (value == turn.end() || !value->is_string()) {
        fail(Errc::kMalformedExport, "conversation '" + conv.id + "' has a turn without text");
      }
      conv.turns.push_back({*speaker, value->get<std::string>()});
    }
    admit(result, std::move(conv));
    ++index;
  }
  return result;
}

ImportResult parse_discord_export(std::string_view document, const LanguageTag& default_language) {
  const json doc = parse_export_array(document);

  struct Exchange {
    std::size_t order;
    bool numeric_time;
    double time_number;
    std::string time_text;
    std::string prompt;
    std::string response;
  };
  std::vector<std::string> group_order;
  std::map<std::string, std::vector<Exchange>> groups;
  std::map<std::string, LanguageTag> group_language;

  std::size_t index = 0;
  for (const auto& item : doc) {
    if (!item.is_object()) fail(Errc::kMalformedExport, "export entry is not an object");
    auto field = [&](const char* key) -> std::string {
      auto it = item.find(key);
      if (it == item.end() || it->is_null()) return {};
      if (!it->is_string()) fail(Errc::kMalformedExport, std::string("'") + key + "' is not a string");
      return it->get<std::string>();
    };
    if (!item.contains("prompt") || !item.contains("response")) {
      fail(Errc::kMalformedExport, "entry " + std::to_string(index) + " lacks prompt/response");
    }
    Exchange ex{index, false, 0.0, {}, field("prompt"), field("response")};
    if (auto ts = item.find("timestamp"); ts != item.end()) {
      if (ts->is_number()) {
        ex.numeric_time = true;
        ex.time_number = ts->get<double>();
      } else if (ts->is_string()) {
        ex.time_text = ts->get<std::string>();
      }
    }
    std::string key;
    if (auto cid = item.find("conversation_id"); cid != item.end()) key = id_string(*cid);
    if (key.empty()) key = "#" + std::to_string(index);
    if (!groups.contains(key)) {
      group_order.push_back(key);
      group_language.emplace(key, language_override(item, default_language));
    }
    groups[key].push_back(std::move(ex));
    ++index;
  }

  ImportResult result;
  for (const auto& key : group_order) {
    auto& exchanges = groups[key];
    std::stable_sort(exchanges.begin(), exchanges.end(), [](const Exchange& a, const Exchange& b) {
      if (a.numeric_time != b.numeric_time) return a.numeric_time;
      if (a.numeric_time) return a.time_number < b.time_number;
      return a.time_text < b.time_text;
    });
    ConversationRecord conv;
    conv.id = key.front() == '#' ? "discord-" + key.substr(1) : "discord-" + key;
    conv.language = group_language.at(key);
    conv.source = ConversationSource::kDiscord;
    for (auto& ex : exchanges) {
      conv.turns.push_back({Speaker::kHuman, std::move(ex.prompt)});
      conv.turns.push_back({Speaker::kAssistant, std::move(ex.response)});
    }
    admit(result, std::move(conv));
  }
  return result;
}

}  // namespace polyforge
