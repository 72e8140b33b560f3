#include "polyforge/tokenizer.hpp"

#include "polyforge/error.hpp"
#include "text_util.hpp"

namespace polyforge {
namespace {

enum class CharClass { kSpace, kWord, kPunct, kCjk };

struct Decoded {
  char32_t cp;
  std::size_t length;
};

// Invalid or truncated sequences decode to U+FFFD one byte at a time.
Decoded decode_utf8(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {0xFFFD, 1};
  }
  if (i + len > s.size()) return {0xFFFD, 1};
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return {0xFFFD, 1};
  return {cp, len};
}

bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

CharClass classify(char32_t cp) {
  if (cp < 0x80) {
    if (cp == ' ' || (cp >= '\t' && cp <= '\r')) return CharClass::kSpace;
    if ((cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) {
      return CharClass::kWord;
    }
    if (cp < 0x20 || cp == 0x7F) return CharClass::kSpace;
    return CharClass::kPunct;
  }
  if (cp == 0x00A0 || cp == 0x1680 || in(cp, 0x2000, 0x200A) || cp == 0x2028 || cp == 0x2029 ||
      cp == 0x202F || cp == 0x205F || cp == 0x3000 || cp == 0x0085) {
    return CharClass::kSpace;
  }
  if (in(cp, 0x3040, 0x30FF) || in(cp, 0x31F0, 0x31FF) || in(cp, 0x3400, 0x4DBF) ||
      in(cp, 0x4E00, 0x9FFF) || in(cp, 0xF900, 0xFAFF) || in(cp, 0x20000, 0x2FA1F)) {
    return CharClass::kCjk;
  }
  if (in(cp, 0x00A1, 0x00BF) || cp == 0x00D7 || cp == 0x00F7 || in(cp, 0x2010, 0x2027) ||
      in(cp, 0x2030, 0x205E) || in(cp, 0x3001, 0x303F) || in(cp, 0xFE30, 0xFE4F) ||
      in(cp, 0xFF01, 0xFF0F) || in(cp, 0xFF1A, 0xFF20) || in(cp, 0xFF3B, 0xFF40) ||
      in(cp, 0xFF5B, 0xFF65)) {
    return CharClass::kPunct;
  }
  return CharClass::kWord;
}

// Calls emit(segment, class) for every token of the unicode-words scheme.
template <class Emit>
void segment(std::string_view text, Emit&& emit) {
  std::size_t i = 0;
  std::size_t word_start = std::string_view::npos;
  auto close_word = [&](std::size_t end) {
    if (word_start != std::string_view::npos) {
      emit(text.substr(word_start, end - word_start), CharClass::kWord);
      word_start = std::string_view::npos;
    }
  };
  while (i < text.size()) {
    const auto [cp, len] = decode_utf8(text, i);
    const CharClass cls = classify(cp);
    if (cls == CharClass::kWord) {
      if (word_start == std::string_view::npos) word_start = i;
    } else {
      close_word(i);
      if (cls != CharClass::kSpace) emit(text.substr(i, len), cls);
    }
    i += len;
  }
  close_word(text.size());
}

}  // namespace

TokenizerRegistry& TokenizerRegistry::global() {
  static TokenizerRegistry registry;
  return registry;
}

TokenizerRegistry::TokenizerRegistry() {
  counters_.emplace(TokenizerId::unicode_words().name, count_unicode_words);
  counters_.emplace(TokenizerId::bytes_div_4().name, count_bytes_div_4);
}

void TokenizerRegistry::add(const std::string& name, TokenCounter counter) {
  std::unique_lock lock(mutex_);
  counters_[name] = std::move(counter);
}

bool TokenizerRegistry::contains(const TokenizerId& id) const {
  std::shared_lock lock(mutex_);
  return counters_.find(id.name) != counters_.end();
}

std::vector<std::string> TokenizerRegistry::names() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, _] : counters_) out.push_back(name);
  return out;
}

std::size_t TokenizerRegistry::count(std::string_view text, const TokenizerId& id) const {
  TokenCounter counter;
  {
    std::shared_lock lock(mutex_);
    auto it = counters_.find(id.name);
    if (it == counters_.end()) fail(Errc::kUnknownTokenizer, "no tokenizer named '" + id.name + "'");
    counter = it->second;
  }
  return counter(text);
}

std::size_t count_tokens(std::string_view text, const TokenizerId& tokenizer) {
  return TokenizerRegistry::global().count(text, tokenizer);
}

std::size_t count_unicode_words(std::string_view text) {
  std::size_t n = 0;
  segment(text, [&](std::string_view, CharClass) { ++n; });
  return n;
}

std::size_t count_bytes_div_4(std::string_view text) noexcept { return (text.size() + 3) / 4; }

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  segment(text, [&](std::string_view piece, CharClass cls) {
    if (cls != CharClass::kPunct) out.push_back(detail::ascii_lower(piece));
  });
  return out;
}

}  // namespace polyforge
