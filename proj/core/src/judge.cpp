#include "polyforge/judge.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <regex>
#include <set>

#include "json.hpp"
#include "text_util.hpp"

namespace polyforge {
namespace {

using json = nlohmann::json;

constexpr std::string_view kRatioSystem =
    "We would like to request your feedback on the performance of two AI assistants in response to the user "
    "question displayed above.\n"
    "Please rate the helpfulness, relevance, accuracy, and level of detail of their responses. Each assistant "
    "receives an overall score on a scale of 1 to 10, where a higher score indicates better overall performance.\n"
    "Please first output a single line containing only two values indicating the scores for Assistant 1 and 2, "
    "respectively. The two scores are separated by a space.\n"
    "In the subsequent line, please provide a comprehensive explanation of your evaluation, avoiding any potential "
    "bias and ensuring that the order in which the responses were presented does not affect your judgment.";

constexpr std::string_view kBeatSystemProtocol =
    "We would like to request your feedback on the performance of two AI assistants in response to the user "
    "question displayed above.\n"
    "Please evaluate the given four aspects: helpfulness, relevance, accuracy, level of details of their "
    "responses.\n"
    "Please first clarify how each response achieves each aspect respectively.\n"
    "Then, provide a comparison of the overall performance between Assistant 1 and Assistant 2, and you need to "
    "clarify which one is better than or equal to another. Avoid any potential bias and ensure that the order in "
    "which the responses were presented does not affect your judgment.\n"
    "In the last line, order the two assistants. Please output a single line ordering Assistant 1 and Assistant 2, "
    "where '>' means 'is better than' and '=' means 'is equal to'. The order should be consistent with your "
    "comparison. If there is no comparison that one is better, it is assumed they have equivalent overall "
    "performance ('=').";

constexpr std::string_view kBeatSystemTranscript =
    "We would like to request your feedback on the performance of two AI assistants in response to the user "
    "question displayed above.\n"
    "Please evaluate the given four aspects: helpfulness, relevance, accuracy, level of details of their "
    "responses.\n"
    "Please first clarify how each response achieves each aspect respectively.\n"
    "Then, provide a comparison on the overall performance between Assistant 1 and Assistant 2, and you need to "
    "clarify which one is better than or equal to another. Avoid any potential bias and ensuring that the order in "
    "which the responses were presented does not affect your judgment.\n"
    "In the last line, order the two assistants. Please output a single line ordering Assistant 1 and Assistant 2, "
    "where '>' means 'is better than' and '=' means 'is equal to'. The order should be consistent to your "
    "comparison. If there is not comparision that one is better, it is assumed they have equivalent overall "
    "performance ('=').";

std::optional<double> parse_number(std::string_view token) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::vector<std::string_view> whitespace_tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

Preference from_slot(SlotOutcome outcome, bool a_first) {
  if (outcome == SlotOutcome::kTie) return Preference::kTie;
  const bool first_won = outcome == SlotOutcome::kFirstWins;
  return first_won == a_first ? Preference::kWin : Preference::kLoss;
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

bool is_question_category(std::string_view name) noexcept {
  return std::find(kQuestionCategories.begin(), kQuestionCategories.end(), name) != kQuestionCategories.end();
}

QuestionSet::QuestionSet(std::vector<Question> questions) : questions_(std::move(questions)) {
  std::set<std::string> ids;
  for (const auto& q : questions_) {
    if (q.id.empty()) fail(Errc::kConfig, "question without id");
    if (!ids.insert(q.id).second) fail(Errc::kConfig, "duplicate question id '" + q.id + "'");
    if (!is_question_category(q.category)) {
      fail(Errc::kConfig, "question '" + q.id + "' has unknown category '" + q.category + "'");
    }
    if (detail::trim(q.text).empty()) fail(Errc::kConfig, "question '" + q.id + "' has no text");
  }
}

QuestionSet QuestionSet::load(const std::filesystem::path& path) {
  std::vector<Question> qs;
  std::size_t lineno = 0;
  const std::string text = detail::read_file(path);
  for (auto line : detail::split_lines(text)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      fail(Errc::kMalformedLine, path.string() + ":" + std::to_string(lineno) + ": not a JSON object");
    }
    Question q;
    if (j.contains("id")) q.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    q.category = j.value("category", "");
    q.language = j.value("language", "");
    q.text = j.value("text", "");
    qs.push_back(std::move(q));
  }
  return QuestionSet(std::move(qs));
}

const Question* QuestionSet::find(std::string_view id) const noexcept {
  auto it = std::find_if(questions_.begin(), questions_.end(), [&](const Question& q) { return q.id == id; });
  return it == questions_.end() ? nullptr : &*it;
}

AnswerSet AnswerSet::load(const std::filesystem::path& path) {
  AnswerSet set;
  std::size_t lineno = 0;
  const std::string text = detail::read_file(path);
  for (auto line : detail::split_lines(text)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(Errc::kMalformedLine, where + ": not a JSON object");
    const std::string model = j.value("model", "");
    if (model.empty()) fail(Errc::kMissingField, where + ": missing 'model'");
    if (set.model.empty()) set.model = model;
    if (model != set.model) fail(Errc::kConfig, where + ": answers from two models in one file");
    std::string qid;
    if (j.contains("question_id")) {
      qid = j["question_id"].is_string() ? j["question_id"].get<std::string>() : j["question_id"].dump();
    }
    if (qid.empty()) fail(Errc::kMissingField, where + ": missing 'question_id'");
    set.answers[qid] = j.value("text", "");
  }
  return set;
}

std::vector<std::string> AnswerSet::missing(const QuestionSet& questions) const {
  std::vector<std::string> out;
  for (const auto& q : questions.questions()) {
    auto it = answers.find(q.id);
    if (it == answers.end() || detail::trim(it->second).empty()) out.push_back(q.id);
  }
  return out;
}

// ------------------------------------------------------------ prompts

std::string_view ratio_system_text() noexcept { return kRatioSystem; }

std::string_view beat_system_text(BeatWording wording) noexcept {
  return wording == BeatWording::kProtocol ? kBeatSystemProtocol : kBeatSystemTranscript;
}

std::string build_review_prompt(std::string_view question, std::string_view answer1, std::string_view answer2,
                                std::string_view system_text) {
  require(!question.empty(), "judge prompt needs a question");
  require(!answer1.empty(), "judge prompt needs answer 1");
  require(!answer2.empty(), "judge prompt needs answer 2");
  std::string out;
  out.reserve(question.size() + answer1.size() + answer2.size() + system_text.size() + 128);
  out += "[Question]\n";
  out += question;
  out += "\n\n[Assistant 1]\n";
  out += answer1;
  out += "\n\n[End of Assistant 1]\n\n[Assistant 2]\n";
  out += answer2;
  out += "\n\n[End of Assistant 2]\n\n[System]\n";
  out += system_text;
  out += "\n\n";
  return out;
}

std::string build_ratio_prompt(std::string_view question, std::string_view answer1, std::string_view answer2) {
  return build_review_prompt(question, answer1, answer2, kRatioSystem);
}

std::string build_beat_prompt(std::string_view question, std::string_view answer1, std::string_view answer2,
                              BeatWording wording) {
  return build_review_prompt(question, answer1, answer2, beat_system_text(wording));
}

// ------------------------------------------------------------ parsing

std::pair<double, double> parse_ratio_reply(std::string_view text) {
  for (auto raw : detail::split_lines(text)) {
    std::string line(raw);
    std::replace(line.begin(), line.end(), ',', ' ');
    const auto tokens = whitespace_tokens(line);
    if (tokens.size() != 2) continue;
    const auto s1 = parse_number(tokens[0]);
    const auto s2 = parse_number(tokens[1]);
    if (!s1 || !s2) continue;
    if (*s1 < 1.0 || *s1 > 10.0 || *s2 < 1.0 || *s2 > 10.0) {
      fail(Errc::kScoreOutOfRange, "scores " + std::string(detail::trim(raw)) + " fall outside 1..10");
    }
    return {*s1, *s2};
  }
  fail(Errc::kUnparseableVerdict, "no line with exactly two scores");
}

std::string_view to_string(SlotOutcome outcome) noexcept {
  switch (outcome) {
    case SlotOutcome::kFirstWins: return "FirstWins";
    case SlotOutcome::kSecondWins: return "SecondWins";
    case SlotOutcome::kTie: return "Tie";
  }
  return "Tie";
}

SlotOutcome parse_beat_reply(std::string_view text) noexcept {
  static const std::regex kOrdering(R"(assistant\s*([12])\s*([<>=])\s*assistant\s*([12]))", std::regex::icase);
  try {
    const auto lines = detail::split_lines(text);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
      const std::string line(*it);
      std::optional<SlotOutcome> found;
      for (std::sregex_iterator m(line.begin(), line.end(), kOrdering), end; m != end; ++m) {
        const char left = (*m)[1].str()[0];
        const char op = (*m)[2].str()[0];
        const char right = (*m)[3].str()[0];
        if (left == right) continue;
        if (op == '=') {
          found = SlotOutcome::kTie;
        } else {
          const char winner = op == '>' ? left : right;
          found = winner == '1' ? SlotOutcome::kFirstWins : SlotOutcome::kSecondWins;
        }
      }
      if (found) return *found;
    }
  } catch (...) {
  }
  return SlotOutcome::kTie;
}

// ------------------------------------------------------------ metrics

std::string_view to_string(Preference p) noexcept {
  switch (p) {
    case Preference::kWin: return "win";
    case Preference::kTie: return "tie";
    case Preference::kLoss: return "loss";
  }
  return "tie";
}

double performance_ratio(std::span<const double> model_scores, std::span<const double> baseline_scores) {
  require(model_scores.size() == baseline_scores.size(), "score lists differ in length");
  require(!model_scores.empty(), "score lists are empty");
  double model_sum = 0.0;
  double baseline_sum = 0.0;
  for (double s : model_scores) model_sum += s;
  for (double s : baseline_scores) baseline_sum += s;
  if (!(baseline_sum > 0.0)) fail(Errc::kZeroBaseline, "baseline scores sum to zero");
  return 100.0 * model_sum / baseline_sum;
}

double beat_rate(std::span<const Preference> outcomes) {
  std::size_t wins = 0;
  std::size_t losses = 0;
  for (auto p : outcomes) {
    if (p == Preference::kWin) ++wins;
    if (p == Preference::kLoss) ++losses;
  }
  if (wins + losses == 0) fail(Errc::kAllTies, "every verdict is a tie");
  return 100.0 * static_cast<double>(wins) / static_cast<double>(wins + losses);
}

Preference reconcile(Preference a_first, Preference b_first) noexcept {
  if (a_first == b_first) return a_first;
  if (a_first == Preference::kTie) return b_first;
  if (b_first == Preference::kTie) return a_first;
  return Preference::kTie;
}

// ------------------------------------------------------------ matchups

std::string_view to_string(JudgeProtocol p) noexcept { return p == JudgeProtocol::kRatio ? "ratio" : "beat"; }

std::string_view to_string(BiasPolicy p) noexcept {
  return p == BiasPolicy::kSingleOrder ? "single-order" : "both-orders";
}

BiasPolicy default_bias_policy(JudgeProtocol protocol) noexcept {
  return protocol == JudgeProtocol::kBeat ? BiasPolicy::kBothOrders : BiasPolicy::kSingleOrder;
}

ChatRequest judge_request(const Question& question, std::string_view answer1, std::string_view answer2,
                          const JudgeConfig& judge, JudgeProtocol protocol) {
  ChatRequest req;
  req.model = judge.model.model;
  req.temperature = judge.model.temperature;
  req.max_tokens = judge.model.max_tokens;
  req.messages.push_back({MessageRole::kSystem, std::string(kReviewerSystemMessage)});
  req.messages.push_back({MessageRole::kUser, protocol == JudgeProtocol::kRatio
                                                  ? build_ratio_prompt(question.text, answer1, answer2)
                                                  : build_beat_prompt(question.text, answer1, answer2,
                                                                      judge.beat_wording)});
  req.metadata["purpose"] = protocol == JudgeProtocol::kRatio ? "judge-ratio" : "judge-beat";
  req.metadata["question_id"] = question.id;
  return req;
}

MatchupSummary run_matchup(const QuestionSet& questions, const AnswerSet& a, const AnswerSet& b, Gateway& gateway,
                           const JudgeConfig& judge, JudgeProtocol protocol, BiasPolicy bias_policy) {
  for (const AnswerSet* set : {&a, &b}) {
    const auto gaps = set->missing(questions);
    if (!gaps.empty()) {
      fail(Errc::kCoverageGap, "answers of '" + set->model + "' miss " + std::to_string(gaps.size()) +
                                   " question(s), first '" + gaps.front() + "'");
    }
  }

  const std::size_t orders = bias_policy == BiasPolicy::kBothOrders ? 2 : 1;
  const auto& qs = questions.questions();
  std::vector<ChatRequest> requests;
  requests.reserve(qs.size() * orders);
  for (const auto& q : qs) {
    const std::string& ans_a = a.answers.find(q.id)->second;
    const std::string& ans_b = b.answers.find(q.id)->second;
    auto req = judge_request(q, ans_a, ans_b, judge, protocol);
    req.metadata["order"] = "a-first";
    requests.push_back(std::move(req));
    if (orders == 2) {
      auto swapped = judge_request(q, ans_b, ans_a, judge, protocol);
      swapped.metadata["order"] = "b-first";
      requests.push_back(std::move(swapped));
    }
  }
  const auto outcomes = gateway.chat_many(requests);

  MatchupSummary summary;
  summary.model_a = a.model;
  summary.model_b = b.model;
  summary.protocol = protocol;
  summary.bias_policy = bias_policy;
  summary.questions = qs.size();

  std::vector<double> scores_a;
  std::vector<double> scores_b;
  std::vector<Preference> prefs;
  for (std::size_t qi = 0; qi < qs.size(); ++qi) {
    QuestionVerdict qv;
    qv.question_id = qs[qi].id;
    std::vector<Preference> order_prefs;
    bool ok = true;
    for (std::size_t o = 0; o < orders && ok; ++o) {
      const auto& outcome = outcomes[qi * orders + o];
      if (outcome.error) {
        summary.ledger.add({qs[qi].id, "judge", outcome.error->code(), outcome.error->what()});
        ok = false;
        break;
      }
      JudgeVerdict v;
      v.kind = protocol;
      v.a_first = o == 0;
      v.fingerprint = outcome.fingerprint;
      v.rationale = outcome.response->text;
      if (protocol == JudgeProtocol::kRatio) {
        try {
          v.scores = parse_ratio_reply(v.rationale);
        } catch (const Error& e) {
          summary.ledger.add({qs[qi].id, "judge", e.code(), e.what()});
          ok = false;
          break;
        }
        const double sa = v.a_first ? v.scores->first : v.scores->second;
        const double sb = v.a_first ? v.scores->second : v.scores->first;
        qv.score_a += sa / static_cast<double>(orders);
        qv.score_b += sb / static_cast<double>(orders);
      } else {
        v.outcome = parse_beat_reply(v.rationale);
        order_prefs.push_back(from_slot(*v.outcome, v.a_first));
      }
      qv.verdicts.push_back(std::move(v));
    }
    if (!ok) continue;

    if (protocol == JudgeProtocol::kRatio) {
      qv.preference = qv.score_a > qv.score_b   ? Preference::kWin
                      : qv.score_a < qv.score_b ? Preference::kLoss
                                                : Preference::kTie;
      scores_a.push_back(qv.score_a);
      scores_b.push_back(qv.score_b);
    } else {
      qv.preference = order_prefs.size() == 2 ? reconcile(order_prefs[0], order_prefs[1]) : order_prefs[0];
    }
    prefs.push_back(qv.preference);
    switch (qv.preference) {
      case Preference::kWin: ++summary.wins; break;
      case Preference::kTie: ++summary.ties; break;
      case Preference::kLoss: ++summary.losses; break;
    }
    summary.per_question.push_back(std::move(qv));
  }

  if (protocol == JudgeProtocol::kRatio) {
    if (!scores_a.empty()) {
      try {
        summary.performance_ratio = performance_ratio(scores_a, scores_b);
      } catch (const Error&) {
      }
    }
  } else {
    try {
      summary.beat_rate = beat_rate(prefs);
    } catch (const Error&) {
    }
  }
  return summary;
}

std::string verdict_log(const MatchupSummary& summary) {
  std::string out;
  for (const auto& qv : summary.per_question) {
    for (const auto& v : qv.verdicts) {
      nlohmann::ordered_json j;
      j["question_id"] = qv.question_id;
      j["protocol"] = std::string(to_string(v.kind));
      j["order"] = v.a_first ? "a-first" : "b-first";
      j["slot1"] = v.a_first ? summary.model_a : summary.model_b;
      j["slot2"] = v.a_first ? summary.model_b : summary.model_a;
      if (v.scores) j["scores"] = {v.scores->first, v.scores->second};
      if (v.outcome) j["outcome"] = std::string(to_string(*v.outcome));
      j["question_preference"] = std::string(to_string(qv.preference));
      j["fingerprint"] = v.fingerprint;
      j["rationale"] = v.rationale;
      out += j.dump(-1, ' ', false, json::error_handler_t::replace);
      out += '\n';
    }
  }
  for (const auto& e : summary.ledger.entries()) {
    nlohmann::ordered_json j;
    j["question_id"] = e.record_id;
    j["error"] = std::string(to_string(e.code));
    j["message"] = e.message;
    out += j.dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

std::string format_summary(const MatchupSummary& s, bool tsv) {
  const std::string pr = s.performance_ratio ? fixed2(*s.performance_ratio) : "n/a";
  const std::string br = s.beat_rate ? fixed2(*s.beat_rate) : "n/a";
  if (tsv) {
    return "model_a\tmodel_b\tprotocol\tbias_policy\tquestions\tjudged\tfailed\twins\tties\tlosses\t"
           "performance_ratio\tbeat_rate\n" +
           s.model_a + '\t' + s.model_b + '\t' + std::string(to_string(s.protocol)) + '\t' +
           std::string(to_string(s.bias_policy)) + '\t' + std::to_string(s.questions) + '\t' +
           std::to_string(s.judged()) + '\t' + std::to_string(s.ledger.size()) + '\t' + std::to_string(s.wins) +
           '\t' + std::to_string(s.ties) + '\t' + std::to_string(s.losses) + '\t' + pr + '\t' + br + '\n';
  }
  std::string out;
  out += s.model_a + " vs. " + s.model_b + "  (" + std::string(to_string(s.protocol)) + ", " +
         std::string(to_string(s.bias_policy)) + ")\n";
  out += "  questions          " + std::to_string(s.questions) + " (judged " + std::to_string(s.judged()) +
         ", failed " + std::to_string(s.ledger.size()) + ")\n";
  out += "  win / tie / lose   " + std::to_string(s.wins) + " / " + std::to_string(s.ties) + " / " +
         std::to_string(s.losses) + "\n";
  out += "  performance ratio  " + pr + "\n";
  out += "  beat rate          " + br + "\n";
  return out;
}

}  // namespace polyforge
