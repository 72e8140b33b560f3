#include "polyforge/humaneval.hpp"

#include <fstream>

#include "httplib.h"
#include "json.hpp"
#include "polyforge/hash.hpp"
#include "polyforge/rng.hpp"
#include "text_util.hpp"

namespace polyforge {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string dump(const ojson& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

HumanOutcome flip(HumanOutcome o) noexcept {
  if (o == HumanOutcome::kWinA) return HumanOutcome::kWinB;
  if (o == HumanOutcome::kWinB) return HumanOutcome::kWinA;
  return HumanOutcome::kTie;
}

ojson session_to_json(const EvalSession& s) {
  ojson j;
  j["id"] = s.id;
  j["model_a"] = s.model_a;
  j["model_b"] = s.model_b;
  j["annotator"] = s.annotator;
  j["seed"] = s.seed;
  j["items"] = ojson::array();
  for (const auto& it : s.items) {
    j["items"].push_back({{"pair_id", it.pair_id},
                          {"question_id", it.question_id},
                          {"question", it.question},
                          {"answer_a", it.answer_a},
                          {"answer_b", it.answer_b},
                          {"a_left", it.a_left}});
  }
  return j;
}

EvalSession session_from_json(const json& j) {
  EvalSession s;
  s.id = j.at("id").get<std::string>();
  s.model_a = j.at("model_a").get<std::string>();
  s.model_b = j.at("model_b").get<std::string>();
  s.annotator = j.value("annotator", "");
  s.seed = j.value("seed", std::uint64_t{0});
  for (const auto& it : j.at("items")) {
    s.items.push_back({it.at("pair_id").get<std::string>(), it.at("question_id").get<std::string>(),
                       it.at("question").get<std::string>(), it.at("answer_a").get<std::string>(),
                       it.at("answer_b").get<std::string>(), it.at("a_left").get<bool>()});
  }
  return s;
}

}  // namespace

std::string_view to_string(HumanVerdict v) noexcept {
  switch (v) {
    case HumanVerdict::kLeftBetter: return "LeftBetter";
    case HumanVerdict::kRightBetter: return "RightBetter";
    case HumanVerdict::kTie: return "Tie";
  }
  return "Tie";
}

std::string_view to_string(HumanOutcome o) noexcept {
  switch (o) {
    case HumanOutcome::kWinA: return "WinA";
    case HumanOutcome::kWinB: return "WinB";
    case HumanOutcome::kTie: return "Tie";
  }
  return "Tie";
}

HumanVerdict parse_human_verdict(std::string_view text) {
  if (text == "LeftBetter") return HumanVerdict::kLeftBetter;
  if (text == "RightBetter") return HumanVerdict::kRightBetter;
  if (text == "Tie") return HumanVerdict::kTie;
  fail(Errc::kPrecondition, "verdict must be LeftBetter, RightBetter or Tie, got '" + std::string(text) + "'");
}

std::optional<HumanOutcome> parse_human_outcome(std::string_view text) noexcept {
  if (text == "WinA") return HumanOutcome::kWinA;
  if (text == "WinB") return HumanOutcome::kWinB;
  if (text == "Tie") return HumanOutcome::kTie;
  return std::nullopt;
}

HumanOutcome deanonymize(HumanVerdict verdict, bool a_left) noexcept {
  switch (verdict) {
    case HumanVerdict::kTie: return HumanOutcome::kTie;
    case HumanVerdict::kLeftBetter: return a_left ? HumanOutcome::kWinA : HumanOutcome::kWinB;
    case HumanVerdict::kRightBetter: return a_left ? HumanOutcome::kWinB : HumanOutcome::kWinA;
  }
  return HumanOutcome::kTie;
}

std::string PairPayload::to_json() const {
  ojson j;
  j["pair_id"] = pair_id;
  j["question"] = question;
  j["left"] = left;
  j["right"] = right;
  return dump(j);
}

const SessionItem* EvalSession::find_pair(std::string_view pair_id) const noexcept {
  for (const auto& it : items) {
    if (it.pair_id == pair_id) return &it;
  }
  return nullptr;
}

EvalSession create_session(const QuestionSet& questions, const AnswerSet& answers_a, const AnswerSet& answers_b,
                           std::uint64_t seed, std::string session_id, std::string annotator) {
  require(!session_id.empty(), "session id must not be empty");
  for (const AnswerSet* set : {&answers_a, &answers_b}) {
    const auto gaps = set->missing(questions);
    if (!gaps.empty()) {
      fail(Errc::kCoverageGap, "an answer set misses " + std::to_string(gaps.size()) + " question(s), first '" +
                                   gaps.front() + "'");
    }
  }
  EvalSession s;
  s.id = std::move(session_id);
  s.model_a = answers_a.model;
  s.model_b = answers_b.model;
  s.annotator = std::move(annotator);
  s.seed = seed;
  SeededRng rng(seed);
  std::size_t index = 0;
  for (const auto& q : questions.questions()) {
    SessionItem item;
    item.pair_id = "p" + sha256_hex(s.id + "/" + std::to_string(index++)).substr(0, 16);
    item.question_id = q.id;
    item.question = q.text;
    item.answer_a = answers_a.answers.find(q.id)->second;
    item.answer_b = answers_b.answers.find(q.id)->second;
    item.a_left = rng.bernoulli(0.5);
    s.items.push_back(std::move(item));
  }
  return s;
}

std::optional<PairPayload> next_pair(const EvalSession& session) {
  for (const auto& it : session.items) {
    if (session.judgments.contains(it.pair_id)) continue;
    return PairPayload{it.pair_id, it.question, it.a_left ? it.answer_a : it.answer_b,
                       it.a_left ? it.answer_b : it.answer_a};
  }
  return std::nullopt;
}

JudgmentAck record_judgment(EvalSession& session, std::string_view pair_id, HumanVerdict verdict) {
  const SessionItem* item = session.find_pair(pair_id);
  if (!item) fail(Errc::kUnknownPair, "no pair '" + std::string(pair_id) + "' in this session");
  const HumanOutcome outcome = deanonymize(verdict, item->a_left);
  JudgmentAck ack;
  auto it = session.judgments.find(pair_id);
  if (it != session.judgments.end()) {
    if (it->second != outcome) fail(Errc::kAlreadyJudged, "pair '" + std::string(pair_id) + "' already judged");
    ack.duplicate = true;
  } else {
    session.judgments.emplace(std::string(pair_id), outcome);
  }
  ack.judged = session.judged();
  ack.total = session.total();
  return ack;
}

HumanSummary aggregate_sessions(const std::vector<const EvalSession*>& sessions) {
  require(!sessions.empty(), "nothing to aggregate");
  HumanSummary summary;
  summary.model_a = sessions.front()->model_a;
  summary.model_b = sessions.front()->model_b;
  for (const EvalSession* s : sessions) {
    bool swapped = false;
    if (s->model_a == summary.model_a && s->model_b == summary.model_b) {
      swapped = false;
    } else if (s->model_a == summary.model_b && s->model_b == summary.model_a) {
      swapped = true;
    } else {
      fail(Errc::kMixedPairs, "session '" + s->id + "' compares a different pair of models");
    }
    for (const auto& [pair, outcome] : s->judgments) {
      switch (swapped ? flip(outcome) : outcome) {
        case HumanOutcome::kWinA: ++summary.win; break;
        case HumanOutcome::kTie: ++summary.tie; break;
        case HumanOutcome::kWinB: ++summary.lose; break;
      }
    }
    ++summary.sessions;
  }
  return summary;
}

// ------------------------------------------------------------ store

struct SessionStore::Slot {
  std::mutex mutex;
  EvalSession session;
  std::filesystem::path log_path;
};

SessionStore::SessionStore() = default;

SessionStore::SessionStore(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) fail(Errc::kIo, "cannot create session directory " + root_.string() + ": " + ec.message());
  load_existing();
}

SessionStore::~SessionStore() = default;

void SessionStore::load_existing() {
  for (const auto& dir : std::filesystem::directory_iterator(root_)) {
    const auto meta = dir.path() / "session.json";
    if (!dir.is_directory() || !std::filesystem::exists(meta)) continue;
    auto slot = std::make_shared<Slot>();
    const json j = json::parse(detail::read_file(meta), nullptr, false);
    if (j.is_discarded()) fail(Errc::kIo, "corrupt session file " + meta.string());
    slot->session = session_from_json(j);
    slot->log_path = dir.path() / "judgments.log";
    if (std::filesystem::exists(slot->log_path)) {
      const std::string log = detail::read_file(slot->log_path);
      for (auto line : detail::split_lines(log)) {
        const json entry = json::parse(line, nullptr, false);
        // A crash can leave a torn final line; it never reached the client as acknowledged.
        if (entry.is_discarded() || !entry.is_object()) continue;
        const auto outcome = parse_human_outcome(entry.value("outcome", ""));
        const std::string pair = entry.value("pair_id", "");
        if (!outcome || !slot->session.find_pair(pair)) continue;
        slot->session.judgments[pair] = *outcome;
      }
    }
    sessions_.emplace(slot->session.id, std::move(slot));
  }
  created_ = sessions_.size();
}

std::string SessionStore::create(const QuestionSet& questions, const AnswerSet& answers_a,
                                 const AnswerSet& answers_b, std::uint64_t seed, std::string annotator) {
  std::lock_guard lock(mutex_);
  std::string id;
  do {
    id = "s" + sha256_hex(answers_a.model + '\n' + answers_b.model + '\n' + std::to_string(seed) + '\n' + annotator +
                          '\n' + std::to_string(created_++))
                   .substr(0, 16);
  } while (sessions_.contains(id));

  auto slot = std::make_shared<Slot>();
  slot->session = create_session(questions, answers_a, answers_b, seed, id, std::move(annotator));
  if (!root_.empty()) {
    const auto dir = root_ / id;
    std::filesystem::create_directories(dir);
    slot->log_path = dir / "judgments.log";
    detail::write_file_atomic(slot->log_path, "");
    detail::write_file_atomic(dir / "session.json", session_to_json(slot->session).dump(2) + "\n");
  }
  sessions_.emplace(id, std::move(slot));
  return id;
}

std::shared_ptr<SessionStore::Slot> SessionStore::slot(std::string_view session_id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) fail(Errc::kUnknownSession, "no session '" + std::string(session_id) + "'");
  return it->second;
}

std::optional<PairPayload> SessionStore::next(std::string_view session_id) const {
  auto s = slot(session_id);
  std::lock_guard lock(s->mutex);
  return next_pair(s->session);
}

JudgmentAck SessionStore::judge(std::string_view session_id, std::string_view pair_id, HumanVerdict verdict) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mutex);
  const JudgmentAck ack = record_judgment(s->session, pair_id, verdict);
  if (!ack.duplicate && !s->log_path.empty()) {
    ojson line;
    line["pair_id"] = std::string(pair_id);
    line["verdict"] = std::string(to_string(verdict));
    line["outcome"] = std::string(to_string(s->session.judgments.find(pair_id)->second));
    std::ofstream out(s->log_path, std::ios::app | std::ios::binary);
    out << dump(line) << '\n';
    out.flush();
    if (!out) fail(Errc::kIo, "cannot append to " + s->log_path.string());
  }
  return ack;
}

EvalSession SessionStore::snapshot(std::string_view session_id) const {
  auto s = slot(session_id);
  std::lock_guard lock(s->mutex);
  return s->session;
}

std::vector<std::string> SessionStore::session_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

HumanSummary SessionStore::summary(std::string_view model_a, std::string_view model_b) const {
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, s] : sessions_) slots.push_back(s);
  }
  std::vector<EvalSession> copies;
  for (const auto& s : slots) {
    std::lock_guard lock(s->mutex);
    const auto& e = s->session;
    if ((e.model_a == model_a && e.model_b == model_b) || (e.model_a == model_b && e.model_b == model_a)) {
      copies.push_back(e);
    }
  }
  HumanSummary summary;
  summary.model_a = std::string(model_a);
  summary.model_b = std::string(model_b);
  if (copies.empty()) return summary;
  // Put a session oriented as requested first so the totals are from model_a's side.
  std::vector<const EvalSession*> ptrs;
  EvalSession anchor;
  anchor.id = "summary-anchor";
  anchor.model_a = summary.model_a;
  anchor.model_b = summary.model_b;
  ptrs.push_back(&anchor);
  for (const auto& c : copies) ptrs.push_back(&c);
  summary = aggregate_sessions(ptrs);
  summary.sessions = copies.size();
  return summary;
}

// ------------------------------------------------------------ HTTP

namespace {

int status_for(Errc code) {
  switch (code) {
    case Errc::kUnknownSession:
    case Errc::kUnknownPair: return 404;
    case Errc::kAlreadyJudged: return 409;
    case Errc::kCoverageGap:
    case Errc::kMixedPairs: return 422;
    case Errc::kIo: return 500;
    default: return 400;
  }
}

void send_json(httplib::Response& res, int status, const ojson& body) {
  res.status = status;
  res.set_content(dump(body), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  ojson body;
  body["error"] = std::string(code);
  body["message"] = message;
  send_json(res, status, body);
}

}  // namespace

HumanEvalServer::HumanEvalServer(SessionStore& store, QuestionSet questions, std::vector<AnswerSet> answer_sets,
                                 HumanEvalServerOptions options)
    : store_(store),
      questions_(std::move(questions)),
      options_(std::move(options)),
      server_(std::make_unique<httplib::Server>()) {
  for (auto& set : answer_sets) {
    if (set.model.empty()) fail(Errc::kConfig, "answer set without a model name");
    const std::string model = set.model;
    if (!answers_.emplace(model, std::move(set)).second) {
      fail(Errc::kConfig, "two answer sets for model '" + model + "'");
    }
  }
  install_routes();
}

HumanEvalServer::~HumanEvalServer() { stop(); }

void HumanEvalServer::install_routes() {
  auto& srv = *server_;

  srv.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (!options_.allow_origin.empty()) {
      res.set_header("Access-Control-Allow-Origin", options_.allow_origin);
      res.set_header("Access-Control-Allow-Headers", "Content-Type, X-Eval-Token");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      if (req.method == "OPTIONS") {
        res.status = 204;
        return httplib::Server::HandlerResponse::Handled;
      }
    }
    if (!options_.token.empty() && req.get_header_value("X-Eval-Token") != options_.token) {
      send_error(res, 401, "Unauthorized", "missing or wrong X-Eval-Token header");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "InternalError", e.what());
    } catch (...) {
      send_error(res, 500, "InternalError", "unknown failure");
    }
  });

  srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      return send_error(res, 400, "BadRequest", "body must be a JSON object");
    }
    const std::string a = body.value("model_a", "");
    const std::string b = body.value("model_b", "");
    auto ia = answers_.find(a);
    auto ib = answers_.find(b);
    if (ia == answers_.end() || ib == answers_.end()) {
      return send_error(res, 400, "BadRequest", "model_a and model_b must name loaded answer sets");
    }
    if (a == b) return send_error(res, 400, "BadRequest", "a session needs two different models");
    const std::uint64_t seed = body.value("seed", SeededRng::kDefaultSeed);
    const std::string id = store_.create(questions_, ia->second, ib->second, seed, body.value("annotator", ""));
    ojson out;
    out["session_id"] = id;
    out["total"] = questions_.size();
    send_json(res, 201, out);
  });

  srv.Get(R"(/sessions/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto pair = store_.next(id);
    const auto snap = store_.snapshot(id);
    ojson out;
    if (pair) {
      out["pair_id"] = pair->pair_id;
      out["question"] = pair->question;
      out["left"] = pair->left;
      out["right"] = pair->right;
    } else {
      out["done"] = true;
    }
    out["judged"] = snap.judged();
    out["total"] = snap.total();
    send_json(res, 200, out);
  });

  srv.Post(R"(/sessions/([^/]+)/judgments)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("pair_id") || !body.contains("verdict") ||
        !body["pair_id"].is_string() || !body["verdict"].is_string()) {
      return send_error(res, 400, "BadRequest", "body must be {pair_id, verdict}");
    }
    const auto verdict = parse_human_verdict(body["verdict"].get<std::string>());
    const auto ack = store_.judge(id, body["pair_id"].get<std::string>(), verdict);
    ojson out;
    out["status"] = ack.duplicate ? "duplicate" : "recorded";
    out["judged"] = ack.judged;
    out["total"] = ack.total;
    send_json(res, 200, out);
  });

  srv.Get("/summaries", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string pair = req.get_param_value("pair");
    const auto comma = pair.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 == pair.size()) {
      return send_error(res, 400, "BadRequest", "expected ?pair=A,B");
    }
    const auto s = store_.summary(pair.substr(0, comma), pair.substr(comma + 1));
    ojson out;
    out["model_a"] = s.model_a;
    out["model_b"] = s.model_b;
    out["win"] = s.win;
    out["tie"] = s.tie;
    out["lose"] = s.lose;
    out["judged"] = s.judged();
    out["sessions"] = s.sessions;
    send_json(res, 200, out);
  });
}

bool HumanEvalServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

int HumanEvalServer::bind_to_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool HumanEvalServer::listen_after_bind() { return server_->listen_after_bind(); }

void HumanEvalServer::stop() {
  if (server_) server_->stop();
}

void HumanEvalServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace polyforge
