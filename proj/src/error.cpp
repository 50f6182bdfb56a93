#include "rarekg/error.hpp"

namespace rarekg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CycleDetected: return "CYCLE_DETECTED";
    case ErrorCode::DanglingParent: return "DANGLING_PARENT";
    case ErrorCode::MalformedStanza: return "MALFORMED_STANZA";
    case ErrorCode::UnknownTerm: return "UNKNOWN_TERM";
    case ErrorCode::EmptyCorpus: return "EMPTY_CORPUS";
    case ErrorCode::EmptyTermSet: return "EMPTY_TERM_SET";
    case ErrorCode::MalformedRow: return "MALFORMED_ROW";
    case ErrorCode::HeaderMismatch: return "HEADER_MISMATCH";
    case ErrorCode::MalformedLine: return "MALFORMED_LINE";
    case ErrorCode::ValidationNotClean: return "VALIDATION_NOT_CLEAN";
    case ErrorCode::DuplicateEdge: return "DUPLICATE_EDGE";
    case ErrorCode::EntityNotFound: return "ENTITY_NOT_FOUND";
    case ErrorCode::NoResolvablePhenotype: return "NO_RESOLVABLE_PHENOTYPE";
    case ErrorCode::MalformedSnapshot: return "MALFORMED_SNAPSHOT";
    case ErrorCode::EmptySet: return "EMPTY_SET";
    case ErrorCode::MissingTruth: return "MISSING_TRUTH";
    case ErrorCode::DegenerateCohort: return "DEGENERATE_COHORT";
    case ErrorCode::InsufficientAnnotations: return "INSUFFICIENT_ANNOTATIONS";
    case ErrorCode::InsufficientDistractorPool: return "INSUFFICIENT_DISTRACTOR_POOL";
    case ErrorCode::StepOutOfRange: return "STEP_OUT_OF_RANGE";
    case ErrorCode::UnknownField: return "UNKNOWN_FIELD";
    case ErrorCode::UnresolvableDiagnosis: return "UNRESOLVABLE_DIAGNOSIS";
    case ErrorCode::EmptyCase: return "EMPTY_CASE";
    case ErrorCode::NoListFound: return "NO_LIST_FOUND";
    case ErrorCode::UnknownDisease: return "UNKNOWN_DISEASE";
    case ErrorCode::EmptyCaseSet: return "EMPTY_CASE_SET";
    case ErrorCode::EmptyInput: return "EMPTY_INPUT";
    case ErrorCode::DegenerateVariance: return "DEGENERATE_VARIANCE";
    case ErrorCode::IncompleteScorecard: return "INCOMPLETE_SCORECARD";
    case ErrorCode::RankDeficient: return "RANK_DEFICIENT";
    case ErrorCode::EmptyFeatures: return "EMPTY_FEATURES";
    case ErrorCode::Unevaluable: return "UNEVALUABLE";
    case ErrorCode::RemoteUnavailable: return "REMOTE_UNAVAILABLE";
    case ErrorCode::MalformedResponse: return "MALFORMED_RESPONSE";
    case ErrorCode::EndpointUnavailable: return "ENDPOINT_UNAVAILABLE";
    case ErrorCode::ReplayMiss: return "REPLAY_MISS";
    case ErrorCode::StillUnparseable: return "STILL_UNPARSEABLE";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::Io: return "IO_ERROR";
    case ErrorCode::Internal: return "INTERNAL";
  }
  return "UNKNOWN";
}

ErrorCategory category(ErrorCode code) {
  switch (code) {
    case ErrorCode::CycleDetected:
    case ErrorCode::DanglingParent:
    case ErrorCode::MalformedStanza:
    case ErrorCode::MalformedRow:
    case ErrorCode::HeaderMismatch:
    case ErrorCode::MalformedLine:
    case ErrorCode::MalformedSnapshot:
    case ErrorCode::NoListFound:
    case ErrorCode::MalformedResponse:
      return ErrorCategory::Parse;
    case ErrorCode::ValidationNotClean:
      return ErrorCategory::Validation;
    case ErrorCode::Io:
      return ErrorCategory::Io;
    case ErrorCode::UnknownTerm:
    case ErrorCode::EntityNotFound:
    case ErrorCode::NoResolvablePhenotype:
    case ErrorCode::UnknownDisease:
    case ErrorCode::UnknownField:
    case ErrorCode::UnresolvableDiagnosis:
    case ErrorCode::ReplayMiss:
      return ErrorCategory::NotFound;
    case ErrorCode::DegenerateCohort:
    case ErrorCode::DegenerateVariance:
    case ErrorCode::RankDeficient:
    case ErrorCode::EmptyCorpus:
      return ErrorCategory::Degenerate;
    case ErrorCode::Unevaluable:
    case ErrorCode::StillUnparseable:
      return ErrorCategory::Unevaluable;
    case ErrorCode::RemoteUnavailable:
    case ErrorCode::EndpointUnavailable:
      return ErrorCategory::Remote;
    case ErrorCode::DuplicateEdge:
    case ErrorCode::Internal:
      return ErrorCategory::Internal;
    default:
      return ErrorCategory::InvalidArgument;
  }
}

} // namespace rarekg
