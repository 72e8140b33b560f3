#include "polyforge/synth.hpp"

#include <algorithm>
#include <optional>
#include <regex>

#include "json.hpp"
#include "polyforge/parallel.hpp"
#include "polyforge/tokenizer.hpp"
#include "text_util.hpp"

namespace polyforge {
namespace {

using json = nlohmann::json;

constexpr std::string_view kPurposeGenerate = "generate-output";

std::string suffixed_id(const std::string& id, const LanguageTag& lang) { return id + "-" + lang.str(); }

void record_failure(FailureLedger& ledger, std::string id, std::string stage, const Error& e) {
  ledger.add({std::move(id), std::move(stage), e.code(), e.what()});
}

std::string trimmed(std::string_view s) { return std::string(detail::trim(s)); }

bool means_empty_input(std::string_view text) {
  const std::string t = detail::ascii_lower(detail::trim(text));
  return t.empty() || t == "<noinput>" || t == "none" || t == "n/a" || t == "empty" || t == "<empty>" ||
         t == "<context or empty>";
}

}  // namespace

std::string_view to_string(TranslationMode mode) noexcept {
  return mode == TranslationMode::kFullTranslation ? "full" : "post-output";
}

TranslationMode parse_translation_mode(std::string_view text) {
  if (text == "full") return TranslationMode::kFullTranslation;
  if (text == "post-output") return TranslationMode::kPostOutput;
  fail(Errc::kConfig, "translation mode must be full or post-output, not '" + std::string(text) + "'");
}

// ------------------------------------------------------------ ledger

std::string FailureLedger::to_jsonl() const {
  std::string out;
  for (const auto& e : entries_) {
    nlohmann::ordered_json j;
    j["record_id"] = e.record_id;
    j["stage"] = e.stage;
    j["error"] = std::string(to_string(e.code));
    j["message"] = e.message;
    out += j.dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

FailureLedger FailureLedger::from_jsonl(std::string_view text) {
  FailureLedger ledger;
  for (auto line : detail::split_lines(text)) {
    if (detail::trim(line).empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(Errc::kMalformedLine, "bad ledger line");
    LedgerEntry e;
    e.record_id = j.value("record_id", "");
    e.stage = j.value("stage", "");
    e.message = j.value("message", "");
    const std::string code = j.value("error", "");
    for (int c = 0; c <= static_cast<int>(Errc::kIo); ++c) {
      if (to_string(static_cast<Errc>(c)) == code) e.code = static_cast<Errc>(c);
    }
    ledger.add(std::move(e));
  }
  return ledger;
}

// ------------------------------------------------------------ generation prompt

ChatRequest generation_request(const SeedTriplet& triplet, const LanguageTag& language, const SynthContext& ctx) {
  const auto& t = ctx.templates;
  const std::string role_clause = triplet.role.empty() ? std::string{} : render(t.generate_role, {{"role", triplet.role}});
  const std::string input_clause =
      triplet.input.empty() ? std::string{} : render(t.generate_input, {{"input", triplet.input}});
  ChatRequest req;
  req.model = ctx.generator.model;
  req.temperature = ctx.generator.temperature;
  req.max_tokens = ctx.generator.max_tokens;
  req.messages.push_back({MessageRole::kUser, render(t.generate, {{"role_clause", role_clause},
                                                                  {"language", ctx.registry.display_name(language)},
                                                                  {"instruction", triplet.instruction},
                                                                  {"input_clause", input_clause}})});
  req.metadata["purpose"] = std::string(kPurposeGenerate);
  req.metadata["target"] = language.str();
  return req;
}

// ------------------------------------------------------------ post-translation

StageResult<InstructionRecord> post_translate(std::span<const InstructionRecord> records,
                                              const LanguageDistribution& dist, TranslationMode mode,
                                              SynthContext& ctx, SeededRng& rng) {
  for (const auto& r : records) {
    validate(r);
    if (mode == TranslationMode::kFullTranslation) {
      require(r.is_complete(), "full translation needs an output for record '" + r.id + "'");
    }
  }

  // All language draws happen here, in input order, so worker scheduling
  // cannot change which record gets which language.
  std::vector<LanguageTag> targets;
  targets.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) targets.push_back(dist.sample(rng));

  const TranslationConfig tcfg = ctx.translation_config();
  std::vector<std::optional<InstructionRecord>> slots(records.size());
  std::vector<std::optional<Error>> errors(records.size());

  parallel_for(records.size(), ctx.gateway.parallelism(), [&](std::size_t i) {
    const InstructionRecord& src = records[i];
    const LanguageTag& lang = targets[i];
    try {
      InstructionRecord out;
      out.id = suffixed_id(src.id, lang);
      out.role = src.role;
      out.language = lang;
      out.instruction = translate(ctx.gateway, src.instruction, src.language, lang, tcfg, "translate-instruction");
      if (!src.input.empty()) {
        out.input = translate(ctx.gateway, src.input, src.language, lang, tcfg, "translate-input");
      }
      if (mode == TranslationMode::kFullTranslation) {
        out.source = InstructionSource::kPostTranslation;
        out.output = translate(ctx.gateway, src.output, src.language, lang, tcfg, "translate-output");
      } else {
        out.source = InstructionSource::kPostOutput;
        const auto req = generation_request({"", out.instruction, out.input}, lang, ctx);
        out.output = trimmed(ctx.gateway.chat(req).text);
        if (out.output.empty()) fail(Errc::kEndpointError, "generator returned an empty output");
      }
      validate(out);
      slots[i] = std::move(out);
    } catch (const Error& e) {
      errors[i] = e;
    }
  });

  StageResult<InstructionRecord> result;
  result.input_count = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (slots[i]) {
      result.records.push_back(std::move(*slots[i]));
    } else {
      record_failure(result.ledger, records[i].id, std::string("post-translate/") + std::string(to_string(mode)),
                     *errors[i]);
    }
  }
  return result;
}

StageResult<ConversationRecord> translate_conversations(std::span<const ConversationRecord> convs,
                                                        const LanguageDistribution& dist, SynthContext& ctx,
                                                        SeededRng& rng) {
  for (const auto& c : convs) validate(c);
  std::vector<LanguageTag> targets;
  for (std::size_t i = 0; i < convs.size(); ++i) targets.push_back(dist.sample(rng));

  const TranslationConfig tcfg = ctx.translation_config();
  std::vector<std::optional<ConversationRecord>> slots(convs.size());
  std::vector<std::optional<Error>> errors(convs.size());
  parallel_for(convs.size(), ctx.gateway.parallelism(), [&](std::size_t i) {
    const ConversationRecord& src = convs[i];
    const LanguageTag& lang = targets[i];
    if (lang == src.language) {
      slots[i] = src;
      return;
    }
    try {
      ConversationRecord out;
      out.id = suffixed_id(src.id, lang);
      out.language = lang;
      out.source = src.source;
      for (const auto& turn : src.turns) {
        out.turns.push_back({turn.speaker, translate(ctx.gateway, turn.text, src.language, lang, tcfg, "translate-turn")});
      }
      validate(out);
      slots[i] = std::move(out);
    } catch (const Error& e) {
      errors[i] = e;
    }
  });

  StageResult<ConversationRecord> result;
  result.input_count = convs.size();
  for (std::size_t i = 0; i < convs.size(); ++i) {
    if (slots[i]) {
      result.records.push_back(std::move(*slots[i]));
    } else {
      record_failure(result.ledger, convs[i].id, "translate-conversations", *errors[i]);
    }
  }
  return result;
}

// ------------------------------------------------------------ roles

std::string RoleSet::normalize(std::string_view role) { return detail::ascii_lower(detail::trim(role)); }

bool RoleSet::add(std::string_view role) {
  const std::string key = normalize(role);
  if (key.empty() || std::find(keys_.begin(), keys_.end(), key) != keys_.end()) return false;
  keys_.push_back(key);
  roles_.emplace_back(detail::trim(role));
  return true;
}

std::size_t RoleSet::merge(std::span<const std::string> roles) {
  std::size_t added = 0;
  for (const auto& r : roles) added += add(r) ? 1 : 0;
  return added;
}

bool RoleSet::contains(std::string_view role) const {
  return std::find(keys_.begin(), keys_.end(), normalize(role)) != keys_.end();
}

std::vector<std::string> parse_role_lines(std::string_view reply) {
  static const std::regex kBullet(R"(^\s*(?:[-*]|•|\d+[.)])\s*)");
  std::vector<std::string> out;
  for (auto line : detail::split_lines(reply)) {
    std::string cleaned = std::regex_replace(std::string(line), kBullet, "", std::regex_constants::format_first_only);
    std::size_t start = 0;
    while (start <= cleaned.size()) {
      auto comma = cleaned.find(',', start);
      if (comma == std::string::npos) comma = cleaned.size();
      auto piece = detail::trim(std::string_view(cleaned).substr(start, comma - start));
      while (!piece.empty() && piece.back() == '.') piece.remove_suffix(1);
      if (!piece.empty()) out.emplace_back(piece);
      start = comma + 1;
    }
  }
  return out;
}

RoleSetResult build_role_set(std::string_view seed_prompt, std::size_t target_count, SynthContext& ctx) {
  require(target_count >= 1, "role target count must be at least 1");
  require(!detail::trim(seed_prompt).empty(), "role seed prompt is empty");
  ChatRequest req;
  req.model = ctx.generator.model;
  req.temperature = ctx.generator.temperature;
  req.max_tokens = ctx.generator.max_tokens;
  req.messages.push_back({MessageRole::kUser, render(seed_prompt, {{"count", std::to_string(target_count)}})});
  req.metadata["purpose"] = "build-roles";

  const auto generated = parse_role_lines(ctx.gateway.chat(req).text);
  RoleSetResult result;
  std::size_t duplicates = 0;
  for (const auto& role : generated) {
    if (result.roles.size() == target_count) break;
    if (!result.roles.add(role)) ++duplicates;
  }
  if (duplicates > 0) {
    result.warnings.push_back(std::to_string(duplicates) + " duplicate role(s) discarded");
  }
  if (result.roles.size() < target_count) {
    result.warnings.push_back("only " + std::to_string(result.roles.size()) + " of " + std::to_string(target_count) +
                              " requested roles were generated");
  }
  return result;
}

// ------------------------------------------------------------ expansion

std::vector<SeedTriplet> load_triplets(const std::filesystem::path& path) {
  std::vector<SeedTriplet> out;
  std::size_t lineno = 0;
  const std::string text = detail::read_file(path);
  for (auto line : detail::split_lines(text)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const json j = json::parse(line, nullptr, false);
    const auto where = path.string() + ":" + std::to_string(lineno);
    if (j.is_discarded() || !j.is_object()) fail(Errc::kMalformedLine, where + ": not a JSON object");
    SeedTriplet t;
    auto str = [&](const char* key) -> std::string {
      auto it = j.find(key);
      if (it == j.end() || it->is_null()) return {};
      if (!it->is_string()) fail(Errc::kMalformedLine, where + ": '" + key + "' is not a string");
      return it->get<std::string>();
    };
    t.role = str("role");
    t.instruction = str("instruction");
    t.input = str("input");
    if (detail::trim(t.instruction).empty()) fail(Errc::kMissingField, where + ": empty 'instruction'");
    out.push_back(std::move(t));
  }
  return out;
}

std::string serialize(const SeedTriplet& t) {
  nlohmann::ordered_json j;
  j["role"] = t.role;
  j["instruction"] = t.instruction;
  j["input"] = t.input;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

double lcs_similarity(std::string_view a, std::string_view b) {
  const auto ta = word_tokens(a);
  const auto tb = word_tokens(b);
  if (ta.empty() && tb.empty()) return 1.0;
  if (ta.empty() || tb.empty()) return 0.0;
  std::vector<std::size_t> prev(tb.size() + 1, 0), cur(tb.size() + 1, 0);
  for (std::size_t i = 1; i <= ta.size(); ++i) {
    for (std::size_t j = 1; j <= tb.size(); ++j) {
      cur[j] = ta[i - 1] == tb[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[tb.size()]);
  return 2.0 * lcs / static_cast<double>(ta.size() + tb.size());
}

bool dedup_filter(const SeedTriplet& candidate, std::span<const SeedTriplet> accepted, double threshold) {
  return std::none_of(accepted.begin(), accepted.end(), [&](const SeedTriplet& a) {
    return lcs_similarity(candidate.instruction, a.instruction) >= threshold;
  });
}

std::vector<SeedTriplet> parse_candidates(std::string_view reply) {
  static const std::regex kInstruction(R"(^\s*(?:\d+[.)]\s*)?\**instruction\**\s*:\s*(.*)$)", std::regex::icase);
  static const std::regex kInput(R"(^\s*\**input\**\s*:\s*(.*)$)", std::regex::icase);

  std::vector<SeedTriplet> out;
  std::optional<SeedTriplet> current;
  enum class Field { kNone, kInstruction, kInput } field = Field::kNone;
  auto flush = [&] {
    if (current) {
      current->instruction = trimmed(current->instruction);
      current->input = means_empty_input(current->input) ? std::string{} : trimmed(current->input);
      if (!current->instruction.empty()) out.push_back(std::move(*current));
    }
    current.reset();
    field = Field::kNone;
  };

  for (auto raw : detail::split_lines(reply)) {
    const std::string line(raw);
    if (detail::trim(line) == "###") {
      flush();
      continue;
    }
    std::smatch m;
    if (std::regex_match(line, m, kInstruction)) {
      flush();
      current = SeedTriplet{};
      current->instruction = m[1].str();
      field = Field::kInstruction;
    } else if (current && std::regex_match(line, m, kInput)) {
      current->input = m[1].str();
      field = Field::kInput;
    } else if (field == Field::kInstruction) {
      current->instruction += "\n" + line;
    } else if (field == Field::kInput) {
      current->input += "\n" + line;
    }
  }
  flush();
  return out;
}

ExpansionResult expand_instructions(std::span<const SeedTriplet> seeds, const RoleSet& roles, std::size_t per_prompt,
                                    std::size_t rounds, SynthContext& ctx, SeededRng& rng,
                                    const ExpandOptions& options) {
  require(!seeds.empty(), "expansion needs at least one seed triplet");
  require(per_prompt >= 1, "per_prompt must be at least 1");
  require(rounds >= 1, "rounds must be at least 1");
  require(options.in_context_examples >= 1, "need at least one in-context example");

  std::vector<SeedTriplet> pool(seeds.begin(), seeds.end());
  ExpansionResult result;
  std::size_t consecutive_stalls = 0;

  for (std::size_t round = 0; round < rounds; ++round) {
    std::string role;
    const bool empty_role = rng.bernoulli(options.empty_role_probability);
    if (!empty_role && !roles.empty()) role = roles.roles()[rng.uniform_index(roles.size())];

    // Partial Fisher-Yates over pool indices.
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const std::size_t k = std::min(options.in_context_examples, pool.size());
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.uniform_index(idx.size() - i)]);

    std::string examples;
    for (std::size_t i = 0; i < k; ++i) {
      const auto& ex = pool[idx[i]];
      if (!examples.empty()) examples += '\n';
      examples += render(ctx.templates.expand_example, {{"instruction", ex.instruction}, {"input", ex.input}});
    }
    const std::string role_clause = role.empty() ? std::string{} : render(ctx.templates.expand_role, {{"role", role}});

    ChatRequest req;
    req.model = ctx.generator.model;
    req.temperature = ctx.generator.temperature;
    req.max_tokens = ctx.generator.max_tokens;
    req.messages.push_back({MessageRole::kUser, render(ctx.templates.expand, {{"count", std::to_string(per_prompt)},
                                                                              {"role_clause", role_clause},
                                                                              {"examples", examples}})});
    req.metadata["purpose"] = "expand-instructions";
    req.metadata["round"] = std::to_string(round);

    auto candidates = parse_candidates(ctx.gateway.chat(req).text);
    if (candidates.empty()) {
      ++result.stalled_rounds;
      if (++consecutive_stalls >= options.stall_limit) {
        fail(Errc::kStallLimit, std::to_string(consecutive_stalls) + " consecutive rounds produced no candidates");
      }
      continue;
    }
    consecutive_stalls = 0;
    if (candidates.size() > per_prompt) candidates.resize(per_prompt);
    for (auto& c : candidates) {
      ++result.parsed;
      c.role = role;
      if (dedup_filter(c, pool, options.dedup_threshold)) {
        pool.push_back(c);
        result.accepted.push_back(std::move(c));
      } else {
        ++result.rejected_duplicates;
      }
    }
  }
  return result;
}

StageResult<InstructionRecord> predict_outputs(std::span<const SeedTriplet> triplets, const LanguageTag& language,
                                               SynthContext& ctx, std::string_view id_prefix) {
  require(!triplets.empty(), "predict_outputs needs at least one triplet");
  std::vector<ChatRequest> requests;
  requests.reserve(triplets.size());
  for (const auto& t : triplets) {
    require(!detail::trim(t.instruction).empty(), "triplet with empty instruction");
    requests.push_back(generation_request(t, language, ctx));
  }
  auto outcomes = ctx.gateway.chat_many(requests);

  StageResult<InstructionRecord> result;
  result.input_count = triplets.size();
  char id_buf[32];
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    std::snprintf(id_buf, sizeof id_buf, "-%06zu", i);
    std::string id = std::string(id_prefix) + id_buf;
    if (outcomes[i].error) {
      record_failure(result.ledger, id, "predict-outputs", *outcomes[i].error);
      continue;
    }
    InstructionRecord r;
    r.id = std::move(id);
    r.role = triplets[i].role;
    r.instruction = triplets[i].instruction;
    r.input = triplets[i].input;
    r.output = trimmed(outcomes[i].response->text);
    r.language = language;
    r.source = InstructionSource::kUserCentered;
    if (r.output.empty()) {
      record_failure(result.ledger, r.id, "predict-outputs", Error(Errc::kEndpointError, "empty output"));
      continue;
    }
    result.records.push_back(std::move(r));
  }
  return result;
}

}  // namespace polyforge
