#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rarekg {

// Symbolic failure codes. Each maps onto one of the coarse C API statuses
// (see category()).
enum class ErrorCode {
  // ontology
  CycleDetected,
  DanglingParent,
  MalformedStanza,
  UnknownTerm,
  EmptyCorpus,
  EmptyTermSet,
  // ingest
  MalformedRow,
  HeaderMismatch,
  MalformedLine,
  // kg
  ValidationNotClean,
  DuplicateEdge,
  EntityNotFound,
  NoResolvablePhenotype,
  MalformedSnapshot,
  // ranking
  EmptySet,
  MissingTruth,
  DegenerateCohort,
  // cases
  InsufficientAnnotations,
  InsufficientDistractorPool,
  StepOutOfRange,
  UnknownField,
  UnresolvableDiagnosis,
  EmptyCase,
  // eval
  NoListFound,
  UnknownDisease,
  EmptyCaseSet,
  EmptyInput,
  DegenerateVariance,
  IncompleteScorecard,
  RankDeficient,
  EmptyFeatures,
  Unevaluable,
  // clients
  RemoteUnavailable,
  MalformedResponse,
  EndpointUnavailable,
  ReplayMiss,
  StillUnparseable,
  // general
  InvalidArgument,
  Io,
  Internal,
};

enum class ErrorCategory { Parse, Validation, Io, InvalidArgument, NotFound, Degenerate, Unevaluable, Remote, Internal };

std::string_view to_string(ErrorCode code);
ErrorCategory category(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace rarekg
