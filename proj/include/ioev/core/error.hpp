#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ioev {

// Every failure the library reports maps to one of these codes. Callers that
// need to branch on a failure (the gateway, the pipelines) switch on code().
enum class ErrorCode {
    InvalidArgument,
    EmptyQuery,
    BackendUnavailable,
    ClassMissing,
    SeriesTooShort,
    ModelNotLoaded,
    ShapeMismatch,
    EmptyShard,
    DimensionMismatch,
    EmptyRound,
    AllColumnsDropped,
    SchemaMismatch,
    TooManyFeaturesForExact,
    EmptyBackground,
    HistoryTooShort,
    ComponentMismatch,
    NoToolForIntent,
    PayloadSchemaMismatch,
    EmptyStore,
    BudgetTooSmall,
    RemoteUnavailable,
    NoCatalogMatch,
    SchemaViolation,
    UnresolvableSlot,
    NoSolverRegistered,
    Infeasible,
    SessionExpired,
    UnknownSession,
    UnknownRound,
    UnknownAlert,
    EmptyCounts,
    LengthMismatch,
    DatasetUnavailable,
    IoError,
    ParseError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

}  // namespace ioev
