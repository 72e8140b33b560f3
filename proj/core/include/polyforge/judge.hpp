#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "polyforge/gateway.hpp"
#include "polyforge/prompts.hpp"
#include "polyforge/synth.hpp"

namespace polyforge {

/// The ten question categories: the Vicuna ones (coding and math pooled)
/// plus reasoning and grammar.
inline constexpr std::array<std::string_view, 10> kQuestionCategories = {
    "generic",        "knowledge", "roleplay", "common-sense", "fermi",
    "counterfactual", "writing",   "coding-math", "reasoning",  "grammar"};

bool is_question_category(std::string_view name) noexcept;

struct Question {
  std::string id;
  std::string category;
  std::string language;
  std::string text;
};

class QuestionSet {
 public:
  QuestionSet() = default;
  /// Throws Error(kConfig) on duplicate ids, unknown categories or blank text.
  explicit QuestionSet(std::vector<Question> questions);

  /// JSONL: {id, category, language, text} per line.
  static QuestionSet load(const std::filesystem::path& path);

  const std::vector<Question>& questions() const noexcept { return questions_; }
  std::size_t size() const noexcept { return questions_.size(); }
  const Question* find(std::string_view id) const noexcept;

 private:
  std::vector<Question> questions_;
};

struct AnswerSet {
  std::string model;
  std::map<std::string, std::string, std::less<>> answers;  // question id -> text

  /// JSONL: {model, question_id, text} per line; every line names the same model.
  static AnswerSet load(const std::filesystem::path& path);
  /// Ids of `questions` that have no non-empty answer.
  std::vector<std::string> missing(const QuestionSet& questions) const;
};

// ------------------------------------------------------------ prompts

/// Reviewer system texts. The ratio text and kProtocol beat text are the
/// evaluation-protocol wording; kTranscript is the beat wording as it
/// appears in the published review transcript, which differs in a handful
/// of words.
enum class BeatWording { kProtocol, kTranscript };

std::string_view ratio_system_text() noexcept;
std::string_view beat_system_text(BeatWording wording = BeatWording::kProtocol) noexcept;

/// Reviewer system message sent alongside every judge prompt.
inline constexpr std::string_view kReviewerSystemMessage =
    "You are a helpful and precise assistant for checking the quality of the answer.";

/// [Question] / [Assistant 1] / [End of Assistant 1] / [Assistant 2] /
/// [End of Assistant 2] / [System] layout with `system_text` at the end.
/// Throws Error(kPrecondition) when any of the three texts is empty.
std::string build_review_prompt(std::string_view question, std::string_view answer1, std::string_view answer2,
                                std::string_view system_text);

std::string build_ratio_prompt(std::string_view question, std::string_view answer1, std::string_view answer2);
std::string build_beat_prompt(std::string_view question, std::string_view answer1, std::string_view answer2,
                              BeatWording wording = BeatWording::kProtocol);

// ------------------------------------------------------------ reply parsing

/// First line made of exactly two numeric tokens (commas count as spaces).
/// Throws Error(kUnparseableVerdict) when there is none and
/// Error(kScoreOutOfRange) when a score is outside [1, 10].
std::pair<double, double> parse_ratio_reply(std::string_view text);

/// Outcome in slot terms: which of Assistant 1 / Assistant 2 was preferred.
enum class SlotOutcome { kFirstWins, kSecondWins, kTie };

std::string_view to_string(SlotOutcome outcome) noexcept;

/// Scans upward from the last line for "Assistant i > Assistant j" (or '=',
/// '<'). No ordering line at all means a tie. Never throws.
SlotOutcome parse_beat_reply(std::string_view text) noexcept;

// ------------------------------------------------------------ metrics

/// Outcome from the perspective of the model under evaluation.
enum class Preference { kWin, kTie, kLoss };

std::string_view to_string(Preference p) noexcept;

/// 100 * sum(model) / sum(baseline). Throws Error(kPrecondition) for
/// mismatched or empty lists and Error(kZeroBaseline) when the baseline sums
/// to zero or less.
double performance_ratio(std::span<const double> model_scores, std::span<const double> baseline_scores);

/// 100 * wins / (wins + losses); ties are ignored. Throws Error(kAllTies)
/// when there is no win and no loss.
double beat_rate(std::span<const Preference> outcomes);

/// Both-orders reconciliation, both arguments from model A's perspective:
/// agreement keeps the verdict, a tie yields to a decided order, and
/// opposite winners become a tie.
Preference reconcile(Preference a_first, Preference b_first) noexcept;

// ------------------------------------------------------------ matchups

enum class JudgeProtocol { kRatio, kBeat };
enum class BiasPolicy { kSingleOrder, kBothOrders };

std::string_view to_string(JudgeProtocol p) noexcept;
std::string_view to_string(BiasPolicy p) noexcept;

/// One judge call. `a_first` tells whether model A sat in slot 1.
struct JudgeVerdict {
  JudgeProtocol kind = JudgeProtocol::kRatio;
  std::optional<std::pair<double, double>> scores;  // slot order
  std::optional<SlotOutcome> outcome;
  std::string rationale;
  bool a_first = true;
  std::string fingerprint;
};

struct QuestionVerdict {
  std::string question_id;
  std::vector<JudgeVerdict> verdicts;  // one per order judged
  Preference preference = Preference::kTie;
  double score_a = 0.0;  // ratio protocol, averaged over orders
  double score_b = 0.0;
};

struct MatchupSummary {
  std::string model_a;
  std::string model_b;
  JudgeProtocol protocol = JudgeProtocol::kRatio;
  BiasPolicy bias_policy = BiasPolicy::kSingleOrder;
  std::optional<double> performance_ratio;  // percent
  std::optional<double> beat_rate;          // percent; empty when all ties
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;
  std::size_t questions = 0;
  std::vector<QuestionVerdict> per_question;
  FailureLedger ledger;

  std::size_t judged() const noexcept { return wins + ties + losses; }
};

struct JudgeConfig {
  ModelSettings model{"gpt-4", 0.2, 1024};
  BeatWording beat_wording = BeatWording::kProtocol;
};

BiasPolicy default_bias_policy(JudgeProtocol protocol) noexcept;

/// Judges every question through the gateway. Under both-orders each
/// question is judged with A first and with B first; ratio scores are
/// averaged per model and beat outcomes reconciled. Failed questions go to
/// the ledger. Throws Error(kCoverageGap) if an answer set misses a question.
MatchupSummary run_matchup(const QuestionSet& questions, const AnswerSet& a, const AnswerSet& b, Gateway& gateway,
                           const JudgeConfig& judge, JudgeProtocol protocol, BiasPolicy bias_policy);

/// The judge request for one question in one slot order.
ChatRequest judge_request(const Question& question, std::string_view answer1, std::string_view answer2,
                          const JudgeConfig& judge, JudgeProtocol protocol);

/// One JSON line per judge call.
std::string verdict_log(const MatchupSummary& summary);
/// Human-readable or TSV summary table.
std::string format_summary(const MatchupSummary& summary, bool tsv);

}  // namespace polyforge
