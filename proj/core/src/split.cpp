#include "polyforge/split.hpp"

#include <string>

#include "polyforge/error.hpp"

namespace polyforge {

std::vector<ConversationChunk> split_long_conversation(const ConversationRecord& conv,
                                                       std::size_t max_tokens,
                                                       const TokenizerId& tokenizer) {
  require(max_tokens >= kMinSplitBudget,
          "split budget must be at least " + std::to_string(kMinSplitBudget) + " tokens");
  validate(conv);

  // A pair is a human turn plus the assistant answer that follows, if any.
  struct Pair {
    std::size_t first;
    std::size_t count;
    std::size_t tokens;
  };
  std::vector<Pair> pairs;
  std::size_t total = 0;
  for (std::size_t i = 0; i < conv.turns.size();) {
    Pair p{i, 0, 0};
    while (i < conv.turns.size() && (p.count == 0 || conv.turns[i].speaker != Speaker::kHuman)) {
      p.tokens += count_tokens(conv.turns[i].text, tokenizer);
      ++p.count;
      ++i;
    }
    total += p.tokens;
    pairs.push_back(p);
  }

  if (total <= max_tokens) return {{conv, total, false}};

  std::vector<ConversationChunk> chunks;
  auto open_chunk = [&] {
    ConversationChunk c;
    c.record.id = conv.id + "#" + std::to_string(chunks.size());
    c.record.language = conv.language;
    c.record.source = conv.source;
    chunks.push_back(std::move(c));
  };
  for (const Pair& p : pairs) {
    const bool need_new = chunks.empty() || chunks.back().oversized ||
                          chunks.back().tokens + p.tokens > max_tokens;
    if (need_new) open_chunk();
    auto& chunk = chunks.back();
    for (std::size_t k = 0; k < p.count; ++k) chunk.record.turns.push_back(conv.turns[p.first + k]);
    chunk.tokens += p.tokens;
    if (p.tokens > max_tokens) chunk.oversized = true;
  }
  return chunks;
}

}  // namespace polyforge
