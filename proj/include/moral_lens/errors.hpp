#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace moral_lens {

/// Root of every error raised by the library. `code()` is the bare type name
/// ("CacheMissError", "NoJsonError", ...) and is what gets persisted in cell
/// documents and reports.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define MORAL_LENS_ERROR_CATEGORY(Name)                                   \
  class Name : public Error {                                             \
   protected:                                                             \
    Name(std::string code, const std::string& message)                    \
        : Error(std::move(code), message) {}                              \
  };

#define MORAL_LENS_ERROR(Name, Category)                                  \
  class Name : public Category {                                          \
   public:                                                                \
    explicit Name(const std::string& message) : Category(#Name, message) {} \
  };

// Data files: instruments, weight tables, participant tables, configs.
MORAL_LENS_ERROR_CATEGORY(DataError)
MORAL_LENS_ERROR(SchemaError, DataError)
MORAL_LENS_ERROR(CardinalityError, DataError)
MORAL_LENS_ERROR(DuplicateIdError, DataError)
MORAL_LENS_ERROR(UnknownValueError, DataError)
MORAL_LENS_ERROR(WeightTableError, DataError)
MORAL_LENS_ERROR(ConfigError, DataError)

MORAL_LENS_ERROR_CATEGORY(PromptError)
MORAL_LENS_ERROR(MissingProfileError, PromptError)
MORAL_LENS_ERROR(ProfileNotAllowedError, PromptError)
MORAL_LENS_ERROR(EmptyReasonError, PromptError)
MORAL_LENS_ERROR(TemplateError, PromptError)

MORAL_LENS_ERROR_CATEGORY(GatewayError)
MORAL_LENS_ERROR(CacheMissError, GatewayError)
MORAL_LENS_ERROR(RateLimitError, GatewayError)
MORAL_LENS_ERROR(BackendRefusalError, GatewayError)

/// Transport failure talking to a backend. Retryable failures (connection
/// errors, 5xx) are retried by the gateway; the rest fail immediately.
class TransportError : public GatewayError {
 public:
  explicit TransportError(const std::string& message, bool retryable = true)
      : GatewayError("TransportError", message), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

MORAL_LENS_ERROR_CATEGORY(ParseError)
MORAL_LENS_ERROR(NoJsonError, ParseError)
MORAL_LENS_ERROR(MissingKeyError, ParseError)
MORAL_LENS_ERROR(AmbiguousLabelError, ParseError)
MORAL_LENS_ERROR(RefusalDetected, ParseError)
MORAL_LENS_ERROR(RatingRangeError, ParseError)

MORAL_LENS_ERROR_CATEGORY(ScoringError)
MORAL_LENS_ERROR(IncompleteResponsesError, ScoringError)

MORAL_LENS_ERROR_CATEGORY(MetricError)
MORAL_LENS_ERROR(EmptyEnsembleError, MetricError)
MORAL_LENS_ERROR(AllZeroShiftsError, MetricError)
MORAL_LENS_ERROR(EmptyResponsesError, MetricError)
MORAL_LENS_ERROR(NoSharedItemsError, MetricError)

MORAL_LENS_ERROR_CATEGORY(PipelineError)
MORAL_LENS_ERROR(NoReasonsError, PipelineError)
MORAL_LENS_ERROR(NoRelevantAnswersError, PipelineError)
MORAL_LENS_ERROR(InsufficientGroupError, PipelineError)
MORAL_LENS_ERROR(NoCompletedCellsError, PipelineError)

#undef MORAL_LENS_ERROR
#undef MORAL_LENS_ERROR_CATEGORY

}  // namespace moral_lens
