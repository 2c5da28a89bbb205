#include "ioev/core/error.hpp"

namespace ioev {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::EmptyQuery: return "EmptyQuery";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
        case ErrorCode::ClassMissing: return "ClassMissing";
        case ErrorCode::SeriesTooShort: return "SeriesTooShort";
        case ErrorCode::ModelNotLoaded: return "ModelNotLoaded";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyShard: return "EmptyShard";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EmptyRound: return "EmptyRound";
        case ErrorCode::AllColumnsDropped: return "AllColumnsDropped";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::TooManyFeaturesForExact: return "TooManyFeaturesForExact";
        case ErrorCode::EmptyBackground: return "EmptyBackground";
        case ErrorCode::HistoryTooShort: return "HistoryTooShort";
        case ErrorCode::ComponentMismatch: return "ComponentMismatch";
        case ErrorCode::NoToolForIntent: return "NoToolForIntent";
        case ErrorCode::PayloadSchemaMismatch: return "PayloadSchemaMismatch";
        case ErrorCode::EmptyStore: return "EmptyStore";
        case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
        case ErrorCode::RemoteUnavailable: return "RemoteUnavailable";
        case ErrorCode::NoCatalogMatch: return "NoCatalogMatch";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::UnresolvableSlot: return "UnresolvableSlot";
        case ErrorCode::NoSolverRegistered: return "NoSolverRegistered";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::SessionExpired: return "SessionExpired";
        case ErrorCode::UnknownSession: return "UnknownSession";
        case ErrorCode::UnknownRound: return "UnknownRound";
        case ErrorCode::UnknownAlert: return "UnknownAlert";
        case ErrorCode::EmptyCounts: return "EmptyCounts";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::DatasetUnavailable: return "DatasetUnavailable";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace ioev
