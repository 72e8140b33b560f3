#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>

#include "CLI11.hpp"
#include "json.hpp"
#include "polyforge/corpus_io.hpp"
#include "polyforge/gateway.hpp"
#include "polyforge/hash.hpp"
#include "polyforge/humaneval.hpp"
#include "polyforge/judge.hpp"
#include "polyforge/languages.hpp"
#include "polyforge/split.hpp"
#include "polyforge/stats.hpp"
#include "polyforge/synth.hpp"

#ifndef POLYFORGE_DEFAULT_DATA_DIR
#define POLYFORGE_DEFAULT_DATA_DIR "data"
#endif
#ifndef POLYFORGE_VERSION_STRING
#define POLYFORGE_VERSION_STRING "0.0.0"
#endif

namespace polyforge::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::kIo, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out.flush()) fail(Errc::kIo, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

fs::path sibling(const fs::path& path, std::string_view suffix) { return path.string() + std::string(suffix); }

std::vector<LanguageTag> parse_tag_list(const std::string& csv) {
  std::vector<LanguageTag> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto comma = std::min(csv.find(',', start), csv.size());
    const std::string piece = csv.substr(start, comma - start);
    if (!piece.empty()) out.emplace_back(piece);
    start = comma + 1;
  }
  return out;
}

int code_for(Errc code) {
  switch (code) {
    case Errc::kThresholdExceeded:
    case Errc::kCacheMiss:
    case Errc::kEndpointError:
    case Errc::kRateLimited:
    case Errc::kStallLimit: return kBreach;
    default: return kValidation;
  }
}

// Records what a command read and wrote so it can be re-run in replay mode.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args, const RunConfig& cfg) {
    doc_["tool"] = "polyforge";
    doc_["version"] = POLYFORGE_VERSION_STRING;
    doc_["command"] = std::move(command);
    doc_["argv"] = args;
    doc_["seed"] = cfg.seed;
    doc_["cache_mode"] = cfg.cache_mode;
    doc_["cache_root"] = cfg.cache_root.string();
    doc_["models"] = {{"translator", cfg.translator_model},
                      {"generator", cfg.generator_model},
                      {"judge", cfg.judge_model}};
    doc_["inputs"] = ojson::array();
    doc_["outputs"] = ojson::array();
    doc_["counts"] = ojson::object();
  }

  void input(const fs::path& path) { doc_["inputs"].push_back(entry(path)); }
  void output(const fs::path& path) { doc_["outputs"].push_back(entry(path)); }
  void count(const std::string& key, std::uint64_t value) { doc_["counts"][key] = value; }
  void note(const std::string& key, const std::string& value) { doc_[key] = value; }
  void gateway(const Gateway& gw) {
    const auto c = gw.counters();
    count("network_calls", c.network_calls);
    count("cache_hits", c.cache_hits);
    count("cache_stores", c.cache_stores);
    count("retries", c.retries);
  }

  fs::path write(const fs::path& primary) const {
    const auto path = sibling(primary, ".manifest.json");
    write_text(path, doc_.dump(2) + "\n");
    return path;
  }

 private:
  static ojson entry(const fs::path& path) { return {{"path", path.string()}, {"sha256", sha256_file(path)}}; }

  ojson doc_;
};

struct Env {
  RunConfig cfg;
  std::vector<std::string> args;
  std::ostream& out;
  std::ostream& err;

  std::unique_ptr<Gateway> gateway() const {
    const CacheMode mode = parse_cache_mode(cfg.cache_mode);
    std::shared_ptr<ChatTransport> transport;
    if (mode != CacheMode::kReplay) transport = HttpChatTransport::from_env(cfg.endpoint_env, cfg.key_env);
    GatewayOptions options;
    options.parallelism = cfg.parallelism;
    return std::make_unique<Gateway>(cfg.cache_root, mode, std::move(transport), options);
  }

  LanguageRegistry registry() const { return LanguageRegistry::load(cfg.languages); }

  PromptTemplates templates() const {
    return cfg.templates.empty() ? PromptTemplates::defaults() : PromptTemplates::load(cfg.templates);
  }

  SynthContext context(Gateway& gw, const LanguageRegistry& reg) const {
    SynthContext ctx{gw, reg};
    ctx.templates = templates();
    ctx.translator.model = cfg.translator_model;
    ctx.generator.model = cfg.generator_model;
    ctx.failure_threshold = cfg.failure_threshold;
    return ctx;
  }
};

void report_ledger(const FailureLedger& ledger, std::ostream& err) {
  constexpr std::size_t kShown = 5;
  std::size_t shown = 0;
  for (const auto& e : ledger.entries()) {
    if (shown++ == kShown) {
      err << "  ... " << (ledger.size() - kShown) << " more\n";
      break;
    }
    err << "  " << e.record_id << " [" << e.stage << "] " << to_string(e.code) << ": " << e.message << "\n";
  }
}

template <class T>
int finish_stage(const StageResult<T>& result, const fs::path& out_path, Manifest& manifest, const Gateway& gw,
                 const Env& env) {
  write_text(out_path, serialize_lines(result.records));
  manifest.output(out_path);
  if (!result.ledger.empty()) {
    const auto ledger_path = sibling(out_path, ".ledger.jsonl");
    write_text(ledger_path, result.ledger.to_jsonl());
    manifest.output(ledger_path);
  }
  manifest.count("input", result.input_count);
  manifest.count("output", result.records.size());
  manifest.count("ledgered", result.ledger.size());
  manifest.gateway(gw);
  manifest.write(out_path);
  env.out << "wrote " << result.records.size() << " of " << result.input_count << " records to " << out_path.string()
          << " (" << result.ledger.size() << " ledgered)\n";
  if (result.breached(env.cfg.failure_threshold)) {
    env.err << "error: " << result.ledger.size() << " of " << result.input_count
            << " records failed, above the threshold of " << env.cfg.failure_threshold << "\n";
    report_ledger(result.ledger, env.err);
    return kBreach;
  }
  if (!result.ledger.empty()) report_ledger(result.ledger, env.err);
  return kOk;
}

// ------------------------------------------------------------ commands

int cmd_langs_report(const Env& env, const fs::path& corpus_path, std::size_t top) {
  const Corpus corpus = load_corpus(corpus_path);
  const auto registry = fs::exists(env.cfg.languages) ? env.registry() : LanguageRegistry{};
  const auto shares = language_report(corpus, top);
  char line[160];
  env.out << "rank\ttag\tlanguage\tcount\tfraction\n";
  for (std::size_t i = 0; i < shares.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu\t%s\t%s\t%zu\t%.4f\n", i + 1, shares[i].tag.str().c_str(),
                  registry.display_name(shares[i].tag).c_str(), shares[i].count, shares[i].fraction);
    env.out << line;
  }
  return kOk;
}

int cmd_langs_show(const Env& env, const std::string& include, const std::string& exclude) {
  const auto registry = env.registry();
  std::optional<std::vector<LanguageTag>> inc;
  std::optional<std::vector<LanguageTag>> exc;
  if (!include.empty()) inc = parse_tag_list(include);
  if (!exclude.empty()) exc = parse_tag_list(exclude);
  const auto dist = build_distribution(registry, inc, exc);
  char line[160];
  env.out << "tag\tlanguage\tpopulation\tweight\n";
  for (const auto& tag : dist.support()) {
    const auto* entry = registry.find(tag);
    std::snprintf(line, sizeof line, "%s\t%s\t%llu\t%.6f\n", tag.str().c_str(), entry->name.c_str(),
                  static_cast<unsigned long long>(entry->population), dist.weight(tag));
    env.out << line;
  }
  return kOk;
}

struct TranslateArgs {
  std::string mode = "full";
  fs::path in;
  fs::path out;
  std::string include;
  std::string exclude;
};

LanguageDistribution distribution_for(const LanguageRegistry& registry, const TranslateArgs& a) {
  std::optional<std::vector<LanguageTag>> inc;
  std::optional<std::vector<LanguageTag>> exc;
  if (!a.include.empty()) inc = parse_tag_list(a.include);
  if (!a.exclude.empty()) exc = parse_tag_list(a.exclude);
  return build_distribution(registry, inc, exc);
}

int cmd_post_translate(const Env& env, const TranslateArgs& a) {
  const auto mode = parse_translation_mode(a.mode);
  const auto registry = env.registry();
  const auto records = load_instructions(a.in, &registry);
  const auto dist = distribution_for(registry, a);
  auto gw = env.gateway();
  auto ctx = env.context(*gw, registry);
  SeededRng rng(env.cfg.seed);
  const auto result = post_translate(records, dist, mode, ctx, rng);

  Manifest m("synth post-translate", env.args, env.cfg);
  m.note("mode", std::string(to_string(mode)));
  m.note("templates_version", ctx.templates.version);
  m.input(a.in);
  m.input(env.cfg.languages);
  return finish_stage(result, a.out, m, *gw, env);
}

int cmd_conversations(const Env& env, const TranslateArgs& a) {
  const auto registry = env.registry();
  const auto convs = load_conversations(a.in, &registry);
  const auto dist = distribution_for(registry, a);
  auto gw = env.gateway();
  auto ctx = env.context(*gw, registry);
  SeededRng rng(env.cfg.seed);
  const auto result = translate_conversations(convs, dist, ctx, rng);

  Manifest m("synth conversations", env.args, env.cfg);
  m.note("templates_version", ctx.templates.version);
  m.input(a.in);
  m.input(env.cfg.languages);
  return finish_stage(result, a.out, m, *gw, env);
}

int cmd_roles(const Env& env, std::size_t target, const fs::path& prompt_file, const fs::path& merge_file,
              const fs::path& out_path) {
  const auto registry = env.registry();
  auto gw = env.gateway();
  auto ctx = env.context(*gw, registry);
  const std::string prompt = prompt_file.empty() ? ctx.templates.roles : read_text(prompt_file);
  auto result = build_role_set(prompt, target, ctx);
  for (const auto& w : result.warnings) env.err << "warning: " << w << "\n";

  Manifest m("synth roles", env.args, env.cfg);
  m.note("templates_version", ctx.templates.version);
  if (!prompt_file.empty()) m.input(prompt_file);
  if (!merge_file.empty()) {
    const auto manual = parse_role_lines(read_text(merge_file));
    const auto added = result.roles.merge(manual);
    env.out << "merged " << added << " new role(s) from " << merge_file.string() << "\n";
    m.input(merge_file);
  }
  std::string text;
  for (const auto& r : result.roles.roles()) text += r + "\n";
  write_text(out_path, text);
  m.output(out_path);
  m.count("roles", result.roles.size());
  m.gateway(*gw);
  m.write(out_path);
  env.out << "wrote " << result.roles.size() << " roles to " << out_path.string() << "\n";
  return kOk;
}

struct ExpandArgs {
  fs::path seeds;
  fs::path roles;
  fs::path out;
  std::size_t per_prompt = 4;
  std::size_t rounds = 10;
  ExpandOptions options;
};

int cmd_expand(const Env& env, const ExpandArgs& a) {
  const auto registry = env.registry();
  const auto seeds = load_triplets(a.seeds);
  RoleSet roles;
  if (!a.roles.empty()) roles.merge(parse_role_lines(read_text(a.roles)));
  auto gw = env.gateway();
  auto ctx = env.context(*gw, registry);
  SeededRng rng(env.cfg.seed);
  const auto result = expand_instructions(seeds, roles, a.per_prompt, a.rounds, ctx, rng, a.options);

  std::string text;
  for (const auto& t : result.accepted) text += serialize(t) + "\n";
  write_text(a.out, text);
  Manifest m("synth expand", env.args, env.cfg);
  m.note("templates_version", ctx.templates.version);
  m.input(a.seeds);
  if (!a.roles.empty()) m.input(a.roles);
  m.output(a.out);
  m.count("accepted", result.accepted.size());
  m.count("parsed", result.parsed);
  m.count("rejected_duplicates", result.rejected_duplicates);
  m.count("stalled_rounds", result.stalled_rounds);
  m.gateway(*gw);
  m.write(a.out);
  env.out << "accepted " << result.accepted.size() << " of " << result.parsed << " candidates ("
          << result.rejected_duplicates << " near-duplicates) into " << a.out.string() << "\n";
  return kOk;
}

int cmd_answer(const Env& env, const fs::path& in, const std::string& language, const std::string& id_prefix,
               const fs::path& out_path) {
  const auto registry = env.registry();
  const LanguageTag lang(language);
  if (!registry.contains(lang)) fail(Errc::kBadLanguage, "language '" + language + "' is not in the registry");
  const auto triplets = load_triplets(in);
  auto gw = env.gateway();
  auto ctx = env.context(*gw, registry);
  const auto result = predict_outputs(triplets, lang, ctx, id_prefix);

  Manifest m("synth answer", env.args, env.cfg);
  m.note("templates_version", ctx.templates.version);
  m.input(in);
  return finish_stage(result, out_path, m, *gw, env);
}

int cmd_ingest(const Env& env, bool sharegpt, const fs::path& in, const fs::path& out_path,
               const std::string& language, std::size_t split_tokens, const std::string& tokenizer) {
  const LanguageTag lang(language);
  const std::string doc = read_text(in);
  const auto imported = sharegpt ? parse_sharegpt_export(doc, lang) : parse_discord_export(doc, lang);

  Manifest m(sharegpt ? "ingest sharegpt" : "ingest discord", env.args, env.cfg);
  m.input(in);
  m.count("conversations", imported.conversations.size());
  m.count("dropped_empty", imported.dropped_empty);
  m.count("dropped_assistant_first", imported.dropped_assistant_first);
  m.count("merged_turns", imported.merged_turns);

  std::vector<ConversationRecord> records;
  if (split_tokens == 0) {
    records = imported.conversations;
  } else {
    const TokenizerId tok{tokenizer};
    std::size_t oversized = 0;
    for (const auto& c : imported.conversations) {
      for (auto& chunk : split_long_conversation(c, split_tokens, tok)) {
        oversized += chunk.oversized ? 1 : 0;
        records.push_back(std::move(chunk.record));
      }
    }
    m.count("chunks", records.size());
    m.count("oversized_chunks", oversized);
    m.note("tokenizer", tokenizer);
  }
  write_text(out_path, serialize_lines(records));
  m.output(out_path);
  m.write(out_path);
  env.out << "imported " << imported.conversations.size() << " conversations (" << imported.dropped()
          << " dropped, " << imported.merged_turns << " turns merged); wrote " << records.size() << " records to "
          << out_path.string() << "\n";
  return kOk;
}

int cmd_stats(const Env& env, const fs::path& corpus_path, const std::string& tokenizer, const std::string& format,
              const fs::path& out_path) {
  const Corpus corpus = load_corpus(corpus_path);
  const auto table = dataset_statistics(corpus, TokenizerId{tokenizer});
  const auto text = format_statistics(table, format == "tsv" ? StatsFormat::kTsv : StatsFormat::kTable);
  env.out << text;
  if (!out_path.empty()) {
    write_text(out_path, text);
    Manifest m("stats", env.args, env.cfg);
    m.note("tokenizer", tokenizer);
    m.input(corpus_path);
    m.output(out_path);
    m.count("records", corpus.size());
    m.write(out_path);
  }
  return kOk;
}

struct EvalArgs {
  fs::path questions;
  fs::path answers_a;
  fs::path answers_b;
  std::string judge_model;
  bool both_orders = false;
  bool single_order = false;
  std::string wording = "protocol";
  fs::path report;
  std::string format = "table";
};

int cmd_eval(const Env& env, JudgeProtocol protocol, const EvalArgs& a) {
  if (a.both_orders && a.single_order) fail(Errc::kConfig, "--both-orders and --single-order exclude each other");
  const auto questions = QuestionSet::load(a.questions);
  const auto answers_a = AnswerSet::load(a.answers_a);
  const auto answers_b = AnswerSet::load(a.answers_b);
  BiasPolicy policy = default_bias_policy(protocol);
  if (a.both_orders) policy = BiasPolicy::kBothOrders;
  if (a.single_order) policy = BiasPolicy::kSingleOrder;
  JudgeConfig judge;
  judge.model.model = a.judge_model.empty() ? env.cfg.judge_model : a.judge_model;
  if (a.wording == "transcript") {
    judge.beat_wording = BeatWording::kTranscript;
  } else if (a.wording != "protocol") {
    fail(Errc::kConfig, "--wording must be protocol or transcript");
  }

  auto gw = env.gateway();
  const auto summary = run_matchup(questions, answers_a, answers_b, *gw, judge, protocol, policy);
  const bool tsv = a.format == "tsv";
  const std::string table = format_summary(summary, tsv);
  env.out << table;
  if (!summary.ledger.empty()) {
    env.err << summary.ledger.size() << " question(s) could not be judged\n";
    report_ledger(summary.ledger, env.err);
  }

  if (!a.report.empty()) {
    Manifest m(std::string("eval ") + std::string(to_string(protocol)), env.args, env.cfg);
    m.note("bias_policy", std::string(to_string(policy)));
    m.input(a.questions);
    m.input(a.answers_a);
    m.input(a.answers_b);
    write_text(a.report, verdict_log(summary));
    m.output(a.report);
    const auto summary_path = sibling(a.report, tsv ? ".summary.tsv" : ".summary.txt");
    write_text(summary_path, table);
    m.output(summary_path);
    m.count("questions", summary.questions);
    m.count("judged", summary.judged());
    m.count("wins", summary.wins);
    m.count("ties", summary.ties);
    m.count("losses", summary.losses);
    m.count("ledgered", summary.ledger.size());
    m.gateway(*gw);
    m.write(a.report);
  }
  const double failed = summary.questions == 0 ? 0.0
                                               : static_cast<double>(summary.ledger.size()) /
                                                     static_cast<double>(summary.questions);
  return failed > env.cfg.failure_threshold ? kBreach : kOk;
}

struct ServeArgs {
  fs::path questions;
  std::vector<fs::path> answers;
  std::string host = "127.0.0.1";
  int port = 8080;
  fs::path sessions = ".polyforge-sessions";
  std::string allow_origin;
};

int cmd_serve(const Env& env, const ServeArgs& a) {
  auto questions = QuestionSet::load(a.questions);
  std::vector<AnswerSet> sets;
  for (const auto& p : a.answers) sets.push_back(AnswerSet::load(p));
  if (sets.size() < 2) fail(Errc::kConfig, "serve-humaneval needs at least two answer files");
  SessionStore store(a.sessions);
  HumanEvalServerOptions options;
  if (const char* token = std::getenv("POLYFORGE_EVAL_TOKEN")) options.token = token;
  options.allow_origin = a.allow_origin;
  HumanEvalServer server(store, std::move(questions), std::move(sets), options);
  env.out << "serving human evaluation on http://" << a.host << ":" << a.port << " (" << store.session_ids().size()
          << " existing sessions)" << std::endl;
  if (!server.listen(a.host, a.port)) fail(Errc::kIo, "cannot listen on " + a.host + ":" + std::to_string(a.port));
  return kOk;
}

int cmd_cache_stats(const Env& env) {
  ReplayCache cache(env.cfg.cache_root, CacheMode::kReplay);
  std::map<std::string, std::size_t> purposes;
  std::map<std::string, std::size_t> models;
  const auto entries = cache.entries();
  for (const auto& e : entries) {
    auto it = e.request.metadata.find("purpose");
    ++purposes[it == e.request.metadata.end() ? "(none)" : it->second];
    ++models[e.request.model];
  }
  env.out << "entries\t" << entries.size() << "\n";
  for (const auto& [p, n] : purposes) env.out << "purpose\t" << p << "\t" << n << "\n";
  for (const auto& [m, n] : models) env.out << "model\t" << m << "\t" << n << "\n";
  return kOk;
}

int cmd_cache_verify(const Env& env) {
  ReplayCache cache(env.cfg.cache_root, CacheMode::kReplay);
  std::size_t files = 0;
  if (fs::is_directory(env.cfg.cache_root)) {
    for (const auto& f : fs::directory_iterator(env.cfg.cache_root)) {
      if (f.path().extension() == ".json") ++files;
    }
  }
  const auto entries = cache.entries();
  std::size_t bad = 0;
  for (const auto& e : entries) {
    const auto fp = fingerprint(e.request);
    if (fp != e.fingerprint) {
      env.err << "mismatch: " << e.fingerprint << " hashes to " << fp << "\n";
      ++bad;
    }
  }
  const std::size_t unreadable = files - entries.size();
  env.out << "checked " << files << " entries: " << bad << " mismatched, " << unreadable << " unreadable\n";
  return bad == 0 && unreadable == 0 ? kOk : kValidation;
}

}  // namespace

void RunConfig::validate() const {
  if (parallelism < 1) fail(Errc::kConfig, "parallelism must be at least 1");
  if (failure_threshold < 0.0 || failure_threshold > 1.0) fail(Errc::kConfig, "failure threshold must be in [0, 1]");
  parse_cache_mode(cache_mode);
  if (!languages.empty() && !fs::exists(languages)) {
    fail(Errc::kConfig, "language table " + languages.string() + " does not exist");
  }
  if (!templates.empty() && !fs::is_directory(templates)) {
    fail(Errc::kConfig, "templates directory " + templates.string() + " does not exist");
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  cfg.languages = fs::path(POLYFORGE_DEFAULT_DATA_DIR) / "languages.tsv";

  CLI::App app{"Multilingual instruction data synthesis and evaluation toolkit", "polyforge"};
  app.set_version_flag("--version", POLYFORGE_VERSION_STRING);
  app.set_config("--config", "", "key=value run configuration; keys are the long option names");
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--seed", cfg.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--cache", cfg.cache_mode, "Response cache mode")
      ->check(CLI::IsMember({"record", "replay", "passthrough"}))
      ->capture_default_str();
  app.add_option("--cache-root", cfg.cache_root, "Response cache directory")->capture_default_str();
  app.add_option("--parallel", cfg.parallelism, "Maximum concurrent endpoint calls")->capture_default_str();
  app.add_option("--languages", cfg.languages, "Language table (tag, name, population)")->capture_default_str();
  app.add_option("--templates", cfg.templates, "Prompt templates directory (built-in texts when unset)");
  app.add_option("--translator-model", cfg.translator_model)->capture_default_str();
  app.add_option("--generator-model", cfg.generator_model)->capture_default_str();
  app.add_option("--judge-model", cfg.judge_model)->capture_default_str();
  app.add_option("--failure-threshold", cfg.failure_threshold, "Largest tolerated ledgered fraction")
      ->capture_default_str();
  app.add_option("--endpoint-env", cfg.endpoint_env, "Environment variable holding the endpoint base URL")
      ->capture_default_str();
  app.add_option("--key-env", cfg.key_env, "Environment variable holding the API key")->capture_default_str();

  std::function<int(const Env&)> action;

  // langs
  auto* langs = app.add_subcommand("langs", "Language registry and distribution reports");
  langs->require_subcommand(1);
  fs::path report_corpus;
  std::size_t top = 15;
  auto* langs_report = langs->add_subcommand("report", "Top languages of a corpus");
  langs_report->add_option("--corpus", report_corpus)->required()->check(CLI::ExistingFile);
  langs_report->add_option("--top", top)->capture_default_str();
  langs_report->callback([&] { action = [&](const Env& e) { return cmd_langs_report(e, report_corpus, top); }; });
  std::string show_include;
  std::string show_exclude;
  auto* langs_show = langs->add_subcommand("show", "Sampling weights of the language table");
  langs_show->add_option("--include", show_include, "Comma-separated tags to keep");
  langs_show->add_option("--exclude", show_exclude, "Comma-separated tags to drop");
  langs_show->callback([&] { action = [&](const Env& e) { return cmd_langs_show(e, show_include, show_exclude); }; });

  // synth
  auto* synth = app.add_subcommand("synth", "Instruction and conversation synthesis");
  synth->require_subcommand(1);
  TranslateArgs targs;
  auto* post = synth->add_subcommand("post-translate", "Translate instruction records into sampled languages");
  post->add_option("--mode", targs.mode)->check(CLI::IsMember({"full", "post-output"}))->capture_default_str();
  post->add_option("--in", targs.in)->required()->check(CLI::ExistingFile);
  post->add_option("--out", targs.out)->required();
  post->add_option("--langs", cfg.languages, "Language table (same as --languages)");
  post->add_option("--include", targs.include, "Comma-separated target tags to keep");
  post->add_option("--exclude", targs.exclude, "Comma-separated target tags to drop");
  post->callback([&] { action = [&](const Env& e) { return cmd_post_translate(e, targs); }; });

  auto* conv = synth->add_subcommand("conversations", "Translate conversations into sampled languages");
  conv->add_option("--in", targs.in)->required()->check(CLI::ExistingFile);
  conv->add_option("--out", targs.out)->required();
  conv->add_option("--langs", cfg.languages, "Language table (same as --languages)");
  conv->add_option("--include", targs.include);
  conv->add_option("--exclude", targs.exclude);
  conv->callback([&] { action = [&](const Env& e) { return cmd_conversations(e, targs); }; });

  std::size_t role_target = 100;
  fs::path role_prompt;
  fs::path role_merge;
  fs::path role_out;
  auto* roles = synth->add_subcommand("roles", "Build a role set");
  roles->add_option("--target", role_target)->capture_default_str();
  roles->add_option("--prompt", role_prompt, "Seed prompt file ({count} is filled in)")->check(CLI::ExistingFile);
  roles->add_option("--merge", role_merge, "Manually curated roles, one per line")->check(CLI::ExistingFile);
  roles->add_option("--out", role_out)->required();
  roles->callback([&] {
    action = [&](const Env& e) { return cmd_roles(e, role_target, role_prompt, role_merge, role_out); };
  });

  ExpandArgs xargs;
  auto* expand = synth->add_subcommand("expand", "Few-shot expansion of seed triplets");
  expand->add_option("--seeds", xargs.seeds)->required()->check(CLI::ExistingFile);
  expand->add_option("--roles", xargs.roles, "Role file, one per line")->check(CLI::ExistingFile);
  expand->add_option("--out", xargs.out)->required();
  expand->add_option("--per-prompt", xargs.per_prompt)->capture_default_str();
  expand->add_option("--rounds", xargs.rounds)->capture_default_str();
  expand->add_option("--examples", xargs.options.in_context_examples, "In-context examples per round")
      ->capture_default_str();
  expand->add_option("--empty-role-probability", xargs.options.empty_role_probability)->capture_default_str();
  expand->add_option("--dedup-threshold", xargs.options.dedup_threshold)->capture_default_str();
  expand->add_option("--stall-limit", xargs.options.stall_limit)->capture_default_str();
  expand->callback([&] { action = [&](const Env& e) { return cmd_expand(e, xargs); }; });

  fs::path answer_in;
  fs::path answer_out;
  std::string answer_lang = "en";
  std::string answer_prefix = "user-centered";
  auto* answer = synth->add_subcommand("answer", "Generate outputs for triplets");
  answer->add_option("--in", answer_in)->required()->check(CLI::ExistingFile);
  answer->add_option("--out", answer_out)->required();
  answer->add_option("--language", answer_lang)->capture_default_str();
  answer->add_option("--id-prefix", answer_prefix)->capture_default_str();
  answer->callback([&] {
    action = [&](const Env& e) { return cmd_answer(e, answer_in, answer_lang, answer_prefix, answer_out); };
  });

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Import raw conversation exports");
  ingest->require_subcommand(1);
  fs::path ingest_in;
  fs::path ingest_out;
  std::string ingest_lang = "en";
  std::size_t split_tokens = 0;
  std::string split_tokenizer = "unicode-words";
  for (const char* kind : {"sharegpt", "discord"}) {
    auto* sub = ingest->add_subcommand(kind, std::string("Import a ") + kind + " export");
    sub->add_option("--in", ingest_in)->required()->check(CLI::ExistingFile);
    sub->add_option("--out", ingest_out)->required();
    sub->add_option("--language", ingest_lang, "Language of conversations without a tag")->capture_default_str();
    sub->add_option("--split", split_tokens, "Split conversations into chunks of at most N tokens (0 = off)")
        ->capture_default_str();
    sub->add_option("--tokenizer", split_tokenizer)->capture_default_str();
    const bool sharegpt = std::string_view(kind) == "sharegpt";
    sub->callback([&, sharegpt] {
      action = [&, sharegpt](const Env& e) {
        return cmd_ingest(e, sharegpt, ingest_in, ingest_out, ingest_lang, split_tokens, split_tokenizer);
      };
    });
  }

  // stats
  fs::path stats_corpus;
  std::string stats_tokenizer = "unicode-words";
  std::string stats_format = "table";
  fs::path stats_out;
  auto* stats = app.add_subcommand("stats", "Per-source sample, turn and token statistics");
  stats->add_option("--corpus", stats_corpus)->required()->check(CLI::ExistingFile);
  stats->add_option("--tokenizer", stats_tokenizer)->capture_default_str();
  stats->add_option("--format", stats_format)->check(CLI::IsMember({"table", "tsv"}))->capture_default_str();
  stats->add_option("--out", stats_out, "Also write the table here");
  stats->callback([&] {
    action = [&](const Env& e) { return cmd_stats(e, stats_corpus, stats_tokenizer, stats_format, stats_out); };
  });

  // eval
  auto* eval = app.add_subcommand("eval", "LLM-as-judge matchups");
  eval->require_subcommand(1);
  EvalArgs eargs;
  for (JudgeProtocol protocol : {JudgeProtocol::kRatio, JudgeProtocol::kBeat}) {
    const std::string name(to_string(protocol));
    auto* sub = eval->add_subcommand(name, protocol == JudgeProtocol::kRatio ? "Score-based performance ratio"
                                                                             : "Ordering-based beat rate");
    sub->add_option("--questions", eargs.questions)->required()->check(CLI::ExistingFile);
    sub->add_option("--answers-a", eargs.answers_a, "Answers of the model under evaluation")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--answers-b", eargs.answers_b, "Answers of the baseline")->required()->check(CLI::ExistingFile);
    sub->add_option("--judge-model", eargs.judge_model);
    sub->add_flag("--both-orders", eargs.both_orders, "Judge every question with both slot orders");
    sub->add_flag("--single-order", eargs.single_order, "Judge with the model under evaluation first only");
    sub->add_option("--wording", eargs.wording, "Beat prompt wording: protocol or transcript")->capture_default_str();
    sub->add_option("--report", eargs.report, "Verdict log path");
    sub->add_option("--format", eargs.format)->check(CLI::IsMember({"table", "tsv"}))->capture_default_str();
    sub->callback([&, protocol] { action = [&, protocol](const Env& e) { return cmd_eval(e, protocol, eargs); }; });
  }

  // serve-humaneval
  ServeArgs sargs;
  auto* serve = app.add_subcommand("serve-humaneval", "Blind pairwise human evaluation service");
  serve->add_option("--questions", sargs.questions)->required()->check(CLI::ExistingFile);
  serve->add_option("--answers", sargs.answers, "Answer files, one per model")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", sargs.host)->capture_default_str();
  serve->add_option("--port", sargs.port)->capture_default_str();
  serve->add_option("--sessions", sargs.sessions, "Session directory")->capture_default_str();
  serve->add_option("--allow-origin", sargs.allow_origin, "CORS origin for a browser front end");
  serve->callback([&] { action = [&](const Env& e) { return cmd_serve(e, sargs); }; });

  // cache
  auto* cache = app.add_subcommand("cache", "Inspect the response cache");
  cache->require_subcommand(1);
  cache->add_subcommand("stats", "Entry counts by purpose and model")->callback([&] {
    action = [](const Env& e) { return cmd_cache_stats(e); };
  });
  cache->add_subcommand("verify", "Recompute every fingerprint")->callback([&] {
    action = [](const Env& e) { return cmd_cache_verify(e); };
  });

  std::vector<const char*> argv;
  argv.push_back("polyforge");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << POLYFORGE_VERSION_STRING << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidation;
  }

  try {
    cfg.validate();
    if (!action) {
      err << app.help();
      return kValidation;
    }
    return action(Env{cfg, args, out, err});
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
}

}  // namespace polyforge::cli
