#include "nativeai/error.hpp"

namespace nativeai {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kCycleDetected: return "CycleDetected";
    case Errc::kDanglingEdge: return "DanglingEdge";
    case Errc::kDuplicateId: return "DuplicateId";
    case Errc::kDuplicateEdge: return "DuplicateEdge";
    case Errc::kInvalidSubtask: return "InvalidSubtask";
    case Errc::kEmptyDocument: return "EmptyDocument";
    case Errc::kEmptySummary: return "EmptySummary";
    case Errc::kEmptyGraphStore: return "EmptyGraphStore";
    case Errc::kBackendUnavailable: return "BackendUnavailable";
    case Errc::kUnrecognizedIntent: return "UnrecognizedIntent";
    case Errc::kUnsupportedIntent: return "UnsupportedIntent";
    case Errc::kNoCapableSpecialist: return "NoCapableSpecialist";
    case Errc::kNoFeasibleTool: return "NoFeasibleTool";
    case Errc::kEmptyFeedback: return "EmptyFeedback";
    case Errc::kDuplicateTool: return "DuplicateTool";
    case Errc::kUnknownTool: return "UnknownTool";
    case Errc::kUpstreamMissingOutput: return "UpstreamMissingOutput";
    case Errc::kDegenerateSnapshot: return "DegenerateSnapshot";
    case Errc::kRankDeficient: return "RankDeficient";
    case Errc::kZeroChannel: return "ZeroChannel";
    case Errc::kInvalidConfig: return "InvalidConfig";
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace nativeai
