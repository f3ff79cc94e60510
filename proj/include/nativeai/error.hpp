#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nativeai {

enum class Errc {
  kCycleDetected,
  kDanglingEdge,
  kDuplicateId,
  kDuplicateEdge,
  kInvalidSubtask,
  kEmptyDocument,
  kEmptySummary,
  kEmptyGraphStore,
  kBackendUnavailable,
  kUnrecognizedIntent,
  kUnsupportedIntent,
  kNoCapableSpecialist,
  kNoFeasibleTool,
  kEmptyFeedback,
  kDuplicateTool,
  kUnknownTool,
  kUpstreamMissingOutput,
  kDegenerateSnapshot,
  kRankDeficient,
  kZeroChannel,
  kInvalidConfig,
  kInvalidArgument,
  kParseError,
};

std::string_view errc_name(Errc code);

// Every recoverable failure in the library surfaces as this exception type;
// callers branch on code() rather than on the message text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code), detail_(detail) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace nativeai
