#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polyforge/judge.hpp"

namespace httplib {
class Server;
}

namespace polyforge {

/// What the annotator clicked, in slot terms.
enum class HumanVerdict { kLeftBetter, kRightBetter, kTie };
/// The verdict after de-anonymisation.
enum class HumanOutcome { kWinA, kWinB, kTie };

std::string_view to_string(HumanVerdict v) noexcept;
std::string_view to_string(HumanOutcome o) noexcept;
/// "LeftBetter" | "RightBetter" | "Tie"; throws Error(kPrecondition) otherwise.
HumanVerdict parse_human_verdict(std::string_view text);
std::optional<HumanOutcome> parse_human_outcome(std::string_view text) noexcept;

/// Maps a slot verdict to a model verdict given where model A sat.
HumanOutcome deanonymize(HumanVerdict verdict, bool a_left) noexcept;

/// Annotator-facing view of one pair. Carries nothing but texts and an
/// opaque id.
struct PairPayload {
  std::string pair_id;
  std::string question;
  std::string left;
  std::string right;

  std::string to_json() const;
};

struct SessionItem {
  std::string pair_id;
  std::string question_id;
  std::string question;
  std::string answer_a;
  std::string answer_b;
  bool a_left = true;
};

struct EvalSession {
  std::string id;
  std::string model_a;
  std::string model_b;
  std::string annotator;
  std::uint64_t seed = 0;
  std::vector<SessionItem> items;
  std::map<std::string, HumanOutcome, std::less<>> judgments;  // pair id -> outcome

  std::size_t total() const noexcept { return items.size(); }
  std::size_t judged() const noexcept { return judgments.size(); }
  const SessionItem* find_pair(std::string_view pair_id) const noexcept;
};

/// Builds a session with one seeded left/right draw per question. Pair ids
/// are derived from the session id and the question position only.
/// Throws Error(kCoverageGap) when either answer set misses a question.
EvalSession create_session(const QuestionSet& questions, const AnswerSet& answers_a, const AnswerSet& answers_b,
                           std::uint64_t seed, std::string session_id, std::string annotator = {});

/// Lowest-index unjudged pair, or nullopt when every pair is judged.
std::optional<PairPayload> next_pair(const EvalSession& session);

struct JudgmentAck {
  bool duplicate = false;
  std::size_t judged = 0;
  std::size_t total = 0;
};

/// Stores the de-anonymised verdict. Re-submitting the same verdict is a
/// no-op; a different one throws Error(kAlreadyJudged). Unknown pair ids
/// throw Error(kUnknownPair).
JudgmentAck record_judgment(EvalSession& session, std::string_view pair_id, HumanVerdict verdict);

struct HumanSummary {
  std::string model_a;
  std::string model_b;
  std::size_t win = 0;  // model A better
  std::size_t tie = 0;
  std::size_t lose = 0;
  std::size_t sessions = 0;

  std::size_t judged() const noexcept { return win + tie + lose; }
};

/// Sums judgments from the first session's model A perspective. Sessions
/// over the same two models in swapped order are flipped; any other pair
/// throws Error(kMixedPairs). An empty list throws Error(kPrecondition).
HumanSummary aggregate_sessions(const std::vector<const EvalSession*>& sessions);

/// Thread-safe set of sessions. With a root directory each session lives in
/// `<root>/<id>/session.json` plus an append-only `judgments.log` that is
/// replayed when the store is opened.
class SessionStore {
 public:
  /// In-memory store.
  SessionStore();
  explicit SessionStore(std::filesystem::path root);
  ~SessionStore();

  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  /// Returns the new session id.
  std::string create(const QuestionSet& questions, const AnswerSet& answers_a, const AnswerSet& answers_b,
                     std::uint64_t seed, std::string annotator = {});

  /// Errors: kUnknownSession.
  std::optional<PairPayload> next(std::string_view session_id) const;
  JudgmentAck judge(std::string_view session_id, std::string_view pair_id, HumanVerdict verdict);
  EvalSession snapshot(std::string_view session_id) const;

  std::vector<std::string> session_ids() const;
  /// Aggregate over every session comparing `model_a` and `model_b` (either
  /// order), from `model_a`'s perspective. Zero counts when there is none.
  HumanSummary summary(std::string_view model_a, std::string_view model_b) const;

 private:
  struct Slot;
  std::shared_ptr<Slot> slot(std::string_view session_id) const;
  void load_existing();

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>, std::less<>> sessions_;
  std::uint64_t created_ = 0;
};

struct HumanEvalServerOptions {
  /// When non-empty every request must carry it in the X-Eval-Token header.
  std::string token;
  /// Value for Access-Control-Allow-Origin; empty disables CORS headers.
  std::string allow_origin;
};

/// HTTP front of a SessionStore:
///   POST /sessions                  {model_a, model_b, seed?, annotator?}
///   GET  /sessions/{id}/next        pair payload or {done: true}
///   POST /sessions/{id}/judgments   {pair_id, verdict}
///   GET  /summaries?pair=A,B
class HumanEvalServer {
 public:
  HumanEvalServer(SessionStore& store, QuestionSet questions, std::vector<AnswerSet> answer_sets,
                  HumanEvalServerOptions options = {});
  ~HumanEvalServer();

  HumanEvalServer(const HumanEvalServer&) = delete;
  HumanEvalServer& operator=(const HumanEvalServer&) = delete;

  /// Blocks until stop().
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it; follow with listen_after_bind().
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  void install_routes();

  SessionStore& store_;
  QuestionSet questions_;
  std::map<std::string, AnswerSet, std::less<>> answers_;
  HumanEvalServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace polyforge
