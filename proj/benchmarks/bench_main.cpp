#include <benchmark/benchmark.h>

#include <string>

#include "polyforge/gateway.hpp"
#include "polyforge/languages.hpp"
#include "polyforge/rng.hpp"
#include "polyforge/synth.hpp"
#include "polyforge/tokenizer.hpp"

using namespace polyforge;

static void BM_SampleLanguage(benchmark::State& state) {
  const auto registry = LanguageRegistry::load(POLYFORGE_DATA_DIR "/languages.tsv");
  const auto dist = build_distribution(registry);
  SeededRng rng(42);
  for (auto _ : state) benchmark::DoNotOptimize(dist.sample(rng));
}
BENCHMARK(BM_SampleLanguage);

static std::string sentence(std::size_t words, std::size_t salt) {
  static const char* vocab[] = {"write", "a", "short", "poem", "about", "the", "sea", "and", "list",
                                "three", "reasons", "why", "people", "love", "travel", "explain"};
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += vocab[(i * 7 + salt) % 16];
  }
  return s;
}

static void BM_LcsSimilarity(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::string a = sentence(n, 1), b = sentence(n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(lcs_similarity(a, b));
}
BENCHMARK(BM_LcsSimilarity)->Arg(16)->Arg(64)->Arg(256);

static void BM_CountUnicodeWords(benchmark::State& state) {
  std::string text;
  for (int i = 0; i < 64; ++i) text += sentence(12, i) + ", 你好世界。 ";
  for (auto _ : state) benchmark::DoNotOptimize(count_unicode_words(text));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_CountUnicodeWords);

static void BM_Fingerprint(benchmark::State& state) {
  ChatRequest req;
  req.model = "gpt-4";
  req.messages = {{MessageRole::kSystem, "You are a helpful assistant."},
                  {MessageRole::kUser, sentence(400, 5)}};
  for (auto _ : state) benchmark::DoNotOptimize(fingerprint(req));
}
BENCHMARK(BM_Fingerprint);
BENCHMARK_MAIN();
