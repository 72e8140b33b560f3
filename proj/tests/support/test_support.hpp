#pragma once

#include <atomic>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "polyforge/gateway.hpp"

#ifndef POLYFORGE_FIXTURE_DIR
#define POLYFORGE_FIXTURE_DIR "tests/fixtures"
#endif
#ifndef POLYFORGE_DATA_DIR
#define POLYFORGE_DATA_DIR "data"
#endif

namespace polyforge::testing {

inline std::filesystem::path fixture(std::string_view relative) {
  return std::filesystem::path(POLYFORGE_FIXTURE_DIR) / relative;
}

inline std::filesystem::path data_file(std::string_view relative) {
  return std::filesystem::path(POLYFORGE_DATA_DIR) / relative;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("polyforge-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Transport backed by a callback; counts calls.
class LambdaTransport final : public ChatTransport {
 public:
  explicit LambdaTransport(std::function<ChatResponse(const ChatRequest&)> fn) : fn_(std::move(fn)) {}

  ChatResponse send(const ChatRequest& request) override {
    ++calls;
    return fn_(request);
  }

  std::atomic<std::size_t> calls{0};

 private:
  std::function<ChatResponse(const ChatRequest&)> fn_;
};

inline ChatResponse reply(std::string text) {
  ChatResponse r;
  r.text = std::move(text);
  return r;
}

inline std::string meta(const ChatRequest& r, const std::string& key) {
  auto it = r.metadata.find(key);
  return it == r.metadata.end() ? std::string{} : it->second;
}

inline std::string between(std::string_view text, std::string_view open, std::string_view close) {
  const auto a = text.find(open);
  if (a == std::string_view::npos) return {};
  const auto start = a + open.size();
  const auto b = text.find(close, start);
  return std::string(text.substr(start, b == std::string_view::npos ? std::string_view::npos : b - start));
}

/// Deterministic stand-in for a chat endpoint, driven by the request
/// metadata the pipelines attach. Used to record the checked-in replay
/// caches and by tests that need a live-looking transport.
class FixtureEndpoint final : public ChatTransport {
 public:
  /// Replies for judge calls, keyed "<question_id>|<order>".
  std::map<std::string, std::string> judge_replies;
  std::string roles_reply = "teacher, lawyer, teacher";
  std::atomic<std::size_t> calls{0};

  ChatResponse send(const ChatRequest& request) override {
    ++calls;
    const std::string purpose = meta(request, "purpose");
    const std::string& prompt = request.messages.back().text;
    if (purpose.rfind("translate", 0) == 0) return reply(translate(prompt, meta(request, "target")));
    if (purpose == "generate-output") {
      const std::string instruction = between(prompt, "### Instruction:\n", "\n");
      if (instruction.find("(unreachable)") != std::string::npos) unreachable();
      return reply("(" + meta(request, "target") + ") A complete answer to: " + instruction);
    }
    if (purpose == "build-roles") return reply(roles_reply);
    if (purpose == "expand-instructions") return reply(expand(prompt, std::stoul(meta(request, "round"))));
    if (purpose == "judge-ratio" || purpose == "judge-beat") {
      std::lock_guard lock(mutex_);
      auto it = judge_replies.find(meta(request, "question_id") + "|" + meta(request, "order"));
      if (it == judge_replies.end()) unreachable();
      return reply(it->second);
    }
    unreachable();
  }

  static const std::vector<std::string>& instruction_bank() {
    static const std::vector<std::string> bank = {
        "List three primary colors.",
        "Write a thank-you note to a colleague who helped with a project.",
        "List three colors.",
        "Explain the difference between a virus and a bacterium.",
        "Suggest five names for a hiking club.",
        "Convert the following recipe to serve two people.|2 cups flour, 4 eggs, 1 litre milk",
        "Describe how a bill becomes a law in a parliamentary system.",
        "Draft a polite reminder about an unpaid invoice.",
        "Summarise the plot of a famous novel in three sentences.",
        "Give feedback on this opening line of an essay.|Since the dawn of time, people have loved pizza.",
        "Create a weekly study plan for learning basic Spanish.",
        "Recommend exercises for improving posture at a desk job.",
        "Explain compound interest to a teenager.",
        "Write a product description for a reusable water bottle.",
        "Compare electric cars and hybrid cars in a short table.",
        "Propose three icebreaker questions for a team meeting.",
        "Translate this sign for tourists into simple English.|Betreten der Baustelle verboten",
        "Outline the steps to change a flat bicycle tyre.",
        "Describe the water cycle for a primary school class.",
        "Write a limerick about a forgetful robot.",
    };
    return bank;
  }

  static constexpr std::size_t kStallRound = 5;

 private:
  [[noreturn]] static void unreachable() {
    throw TransportError(TransportError::Kind::kPermanent, "fixture endpoint has no answer for this request");
  }

  static std::string translate(const std::string& prompt, const std::string& target) {
    const auto split = prompt.find("\n\n");
    const std::string text = split == std::string::npos ? prompt : prompt.substr(split + 2);
    if (text.find("(unreachable)") != std::string::npos) unreachable();
    if (text == "Hello" && target == "fr") return "Bonjour";
    return "[" + target + "] " + text;
  }

  static std::string expand(const std::string& prompt, std::size_t round) {
    if (round == kStallRound) return "I am sorry, but I cannot come up with new tasks right now.";
    const auto& bank = instruction_bank();
    std::string out;
    auto block = [&out](const std::string& entry) {
      const auto bar = entry.find('|');
      out += "Instruction: " + entry.substr(0, bar) + "\n";
      out += "Input: " + (bar == std::string::npos ? std::string{} : entry.substr(bar + 1)) + "\n###\n";
    };
    for (std::size_t j = 0; j < 3; ++j) block(bank[(3 * round + j) % bank.size()]);
    // A near copy of the first in-context example, which dedup must reject.
    std::string example = between(prompt, "Examples:\nInstruction: ", "\n");
    if (!example.empty()) {
      example[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(example[0])));
      block("Please " + example);
    }
    return out;
  }

  std::mutex mutex_;
};

}  // namespace polyforge::testing
