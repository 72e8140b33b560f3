#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polyforge/error.hpp"
#include "polyforge/gateway.hpp"
#include "polyforge/languages.hpp"
#include "polyforge/prompts.hpp"
#include "polyforge/records.hpp"
#include "polyforge/rng.hpp"

namespace polyforge {

/// FullTranslation translates instruction, input and output. PostOutput
/// translates instruction and input, then generates a fresh output in the
/// target language.
enum class TranslationMode { kFullTranslation, kPostOutput };

std::string_view to_string(TranslationMode mode) noexcept;
/// Accepts "full" and "post-output".
TranslationMode parse_translation_mode(std::string_view text);

struct LedgerEntry {
  std::string record_id;
  std::string stage;
  Errc code = Errc::kEndpointError;
  std::string message;
};

/// Records skipped by a stage. Serialised as one JSON object per line.
class FailureLedger {
 public:
  void add(LedgerEntry entry) { entries_.push_back(std::move(entry)); }
  const std::vector<LedgerEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  std::string to_jsonl() const;
  static FailureLedger from_jsonl(std::string_view text);

 private:
  std::vector<LedgerEntry> entries_;
};

template <class T>
struct StageResult {
  std::vector<T> records;
  FailureLedger ledger;
  std::size_t input_count = 0;

  double failure_fraction() const noexcept {
    return input_count == 0 ? 0.0 : static_cast<double>(ledger.size()) / static_cast<double>(input_count);
  }
  bool breached(double threshold) const noexcept { return failure_fraction() > threshold; }
};

/// Everything a stage needs besides its inputs.
struct SynthContext {
  Gateway& gateway;
  const LanguageRegistry& registry;
  PromptTemplates templates = PromptTemplates::defaults();
  ModelSettings translator{"gpt-4", 0.0, 2048};
  ModelSettings generator{"gpt-3.5-turbo", 0.7, 2048};
  double failure_threshold = 0.05;

  TranslationConfig translation_config() const { return {translator, templates.translate, &registry}; }
};

/// Throws Error(kThresholdExceeded) when the stage's failure fraction is above
/// the context threshold.
template <class T>
void ensure_within_threshold(const StageResult<T>& result, double threshold) {
  if (result.breached(threshold)) {
    fail(Errc::kThresholdExceeded, std::to_string(result.ledger.size()) + " of " +
                                       std::to_string(result.input_count) + " records failed");
  }
}

// ------------------------------------------------------------ translation

/// Samples one target language per record (sequentially, before any call),
/// then translates each record in bounded parallel. Output record i keeps
/// the relative order of its input; failed records go to the ledger.
/// Throws Error(kPrecondition) when FullTranslation receives a record
/// without output.
StageResult<InstructionRecord> post_translate(std::span<const InstructionRecord> records,
                                              const LanguageDistribution& dist, TranslationMode mode,
                                              SynthContext& ctx, SeededRng& rng);

/// One sampled language per conversation; every turn is translated.
/// Conversations whose sampled language equals their own pass through as is.
StageResult<ConversationRecord> translate_conversations(std::span<const ConversationRecord> convs,
                                                        const LanguageDistribution& dist, SynthContext& ctx,
                                                        SeededRng& rng);

// ------------------------------------------------------------ roles

/// Roles unique after trimming and ASCII case folding; first spelling wins.
class RoleSet {
 public:
  static std::string normalize(std::string_view role);

  /// False (and no change) for blank or already-present roles.
  bool add(std::string_view role);
  /// Returns how many roles were new.
  std::size_t merge(std::span<const std::string> roles);
  bool contains(std::string_view role) const;

  const std::vector<std::string>& roles() const noexcept { return roles_; }
  std::size_t size() const noexcept { return roles_.size(); }
  bool empty() const noexcept { return roles_.empty(); }

 private:
  std::vector<std::string> roles_;
  std::vector<std::string> keys_;
};

/// One role per line; bullets and numbering are stripped and comma-separated
/// lists are split.
std::vector<std::string> parse_role_lines(std::string_view reply);

struct RoleSetResult {
  RoleSet roles;
  std::vector<std::string> warnings;
};

/// Asks the generator for `target_count` roles using `seed_prompt` (its
/// `{count}` placeholder is filled in) and keeps at most `target_count`
/// unique ones. Fewer unique roles than requested is a warning.
RoleSetResult build_role_set(std::string_view seed_prompt, std::size_t target_count, SynthContext& ctx);

// ------------------------------------------------------------ expansion

struct SeedTriplet {
  std::string role;
  std::string instruction;
  std::string input;

  bool operator==(const SeedTriplet&) const = default;
};

std::vector<SeedTriplet> load_triplets(const std::filesystem::path& path);
std::string serialize(const SeedTriplet& triplet);

/// Normalised token-level LCS similarity: 2 * lcs / (|a| + |b|) over
/// word_tokens(). Two empty token lists are identical (1.0).
double lcs_similarity(std::string_view a, std::string_view b);

/// True when the candidate's instruction is less than `threshold` similar to
/// every accepted instruction.
bool dedup_filter(const SeedTriplet& candidate, std::span<const SeedTriplet> accepted, double threshold);

/// Blocks separated by "###" lines, each with an "Instruction:" field and an
/// optional "Input:" field. Blocks without an instruction are skipped.
std::vector<SeedTriplet> parse_candidates(std::string_view reply);

struct ExpandOptions {
  std::size_t in_context_examples = 3;
  double empty_role_probability = 0.1;
  double dedup_threshold = 0.7;
  std::size_t stall_limit = 5;
};

struct ExpansionResult {
  std::vector<SeedTriplet> accepted;
  std::size_t parsed = 0;
  std::size_t rejected_duplicates = 0;
  std::size_t stalled_rounds = 0;
};

/// Few-shot expansion. Each round draws a role (empty with the configured
/// probability) and k in-context examples from seeds plus accepted
/// candidates, asks for `per_prompt` new tasks, and admits candidates that
/// pass dedup_filter against that pool. Throws Error(kStallLimit) after
/// `stall_limit` consecutive rounds with nothing parseable.
ExpansionResult expand_instructions(std::span<const SeedTriplet> seeds, const RoleSet& roles,
                                    std::size_t per_prompt, std::size_t rounds, SynthContext& ctx,
                                    SeededRng& rng, const ExpandOptions& options = {});

/// The generation request for one (role, instruction, input); the role
/// clause is omitted entirely when the role is empty.
ChatRequest generation_request(const SeedTriplet& triplet, const LanguageTag& language, const SynthContext& ctx);

/// One complete user-centred record per triplet, ids `<id_prefix>-NNNNNN`.
StageResult<InstructionRecord> predict_outputs(std::span<const SeedTriplet> triplets, const LanguageTag& language,
                                               SynthContext& ctx, std::string_view id_prefix = "user-centered");

}  // namespace polyforge
