#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace polyforge {

/// Name of a registered token-counting scheme.
struct TokenizerId {
  std::string name;

  static TokenizerId unicode_words() { return {"unicode-words"}; }
  static TokenizerId bytes_div_4() { return {"bytes-div-4"}; }

  auto operator<=>(const TokenizerId&) const = default;
};

using TokenCounter = std::function<std::size_t(std::string_view)>;

/// Thread-safe name -> counter table. The process-wide instance comes
/// preloaded with "unicode-words" and "bytes-div-4".
class TokenizerRegistry {
 public:
  static TokenizerRegistry& global();

  TokenizerRegistry();

  /// Replaces any previous counter of the same name.
  void add(const std::string& name, TokenCounter counter);
  bool contains(const TokenizerId& id) const;
  std::vector<std::string> names() const;

  /// Throws Error(kUnknownTokenizer).
  std::size_t count(std::string_view text, const TokenizerId& id) const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, TokenCounter, std::less<>> counters_;
};

/// Uses the global registry.
std::size_t count_tokens(std::string_view text, const TokenizerId& tokenizer);

/// Maximal runs of word characters count once; every punctuation mark and
/// every CJK ideograph/kana counts on its own; whitespace separates.
std::size_t count_unicode_words(std::string_view text);

/// ceil(bytes / 4).
std::size_t count_bytes_div_4(std::string_view text) noexcept;

/// The word segments of the unicode-words scheme with punctuation removed
/// and ASCII letters lowercased. Used for similarity scoring.
std::vector<std::string> word_tokens(std::string_view text);

}  // namespace polyforge
