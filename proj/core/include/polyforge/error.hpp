#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace polyforge {

enum class Errc {
  kMalformedLine,
  kMissingField,
  kBadLanguage,
  kDuplicateId,
  kMalformedExport,
  kEmptyConversation,
  kPrecondition,
  kEmptySupport,
  kEmptyCorpus,
  kUnknownTokenizer,
  kCacheMiss,
  kEndpointError,
  kRateLimited,
  kThresholdExceeded,
  kStallLimit,
  kUnparseableVerdict,
  kScoreOutOfRange,
  kZeroBaseline,
  kAllTies,
  kCoverageGap,
  kUnknownSession,
  kUnknownPair,
  kAlreadyJudged,
  kMixedPairs,
  kConfig,
  kIo,
};

std::string_view to_string(Errc code) noexcept;

// Every failure raised by the library carries one of the codes above so
// callers (the CLI, the failure ledger, the HTTP layer) can map it without
// string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(Errc::kPrecondition, message);
}

}  // namespace polyforge
