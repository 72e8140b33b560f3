#pragma once

#include <cstddef>
#include <vector>

#include "polyforge/records.hpp"
#include "polyforge/tokenizer.hpp"

namespace polyforge {

/// Context budget used when training-style data is cut into windows.
inline constexpr std::size_t kDefaultMaxContextTokens = 2048;
inline constexpr std::size_t kMinSplitBudget = 32;

struct ConversationChunk {
  ConversationRecord record;
  std::size_t tokens = 0;
  /// Set when the chunk is a single human/assistant pair that alone exceeds
  /// the budget.
  bool oversized = false;
};

/// Greedily packs consecutive human/assistant pairs into chunks of at most
/// `max_tokens` tokens, cutting only before a human turn. A conversation
/// that already fits comes back unchanged as one chunk; otherwise chunk ids
/// get a "#k" suffix. Throws Error(kPrecondition) when max_tokens < 32.
std::vector<ConversationChunk> split_long_conversation(const ConversationRecord& conv,
                                                       std::size_t max_tokens,
                                                       const TokenizerId& tokenizer);

}  // namespace polyforge
