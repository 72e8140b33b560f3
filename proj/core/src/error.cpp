#include "polyforge/error.hpp"

namespace polyforge {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::kMalformedLine: return "MalformedLine";
    case Errc::kMissingField: return "MissingField";
    case Errc::kBadLanguage: return "BadLanguage";
    case Errc::kDuplicateId: return "DuplicateId";
    case Errc::kMalformedExport: return "MalformedExport";
    case Errc::kEmptyConversation: return "EmptyConversation";
    case Errc::kPrecondition: return "PreconditionViolation";
    case Errc::kEmptySupport: return "EmptySupport";
    case Errc::kEmptyCorpus: return "EmptyCorpus";
    case Errc::kUnknownTokenizer: return "UnknownTokenizer";
    case Errc::kCacheMiss: return "CacheMiss";
    case Errc::kEndpointError: return "EndpointError";
    case Errc::kRateLimited: return "RateLimited";
    case Errc::kThresholdExceeded: return "ThresholdExceeded";
    case Errc::kStallLimit: return "StallLimit";
    case Errc::kUnparseableVerdict: return "UnparseableVerdict";
    case Errc::kScoreOutOfRange: return "ScoreOutOfRange";
    case Errc::kZeroBaseline: return "ZeroBaseline";
    case Errc::kAllTies: return "AllTies";
    case Errc::kCoverageGap: return "CoverageGap";
    case Errc::kUnknownSession: return "UnknownSession";
    case Errc::kUnknownPair: return "UnknownPair";
    case Errc::kAlreadyJudged: return "AlreadyJudged";
    case Errc::kMixedPairs: return "MixedPairs";
    case Errc::kConfig: return "ConfigError";
    case Errc::kIo: return "IoError";
  }
  return "Unknown";
}

void fail(Errc code, const std::string& message) {
  throw Error(code, std::string(to_string(code)) + ": " + message);
}

}  // namespace polyforge
