#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ioev::support {

inline constexpr const char* kAosSchemaVersion = "ioev.aos/1";

enum class ProblemType { cost_min_charging, deadline_feasibility, station_selection, multi_objective_weighted };
enum class SlotCategory { type1_explicit, type2_physical };
enum class Provenance { request_text, vehicle_profile, forecaster, calendar, default_value };
// Shape of a slot value, checked when a skeleton is validated.
enum class ValueKind { text, number, number_list, object_list };

std::string to_string(ProblemType t);
ProblemType parse_problem_type(const std::string& s);
std::string to_string(SlotCategory c);
SlotCategory parse_slot_category(const std::string& s);
std::string to_string(Provenance p);
Provenance parse_provenance(const std::string& s);

const std::vector<ProblemType>& all_problem_types();

struct ParameterSlot {
    std::string name;
    SlotCategory category = SlotCategory::type1_explicit;
    // Resolved iff set.
    std::optional<nlohmann::json> value;
    // Source used once resolved; intended source while unresolved.
    Provenance provenance = Provenance::request_text;

    bool resolved() const { return value.has_value(); }
};

struct Variable {
    std::string name;
    std::string domain;
    std::string units;
};

struct AbstractOptimizationSkeleton {
    ProblemType problem_type = ProblemType::cost_min_charging;
    std::string objective;
    std::vector<Variable> variables;
    std::vector<std::string> constraints;
    std::vector<ParameterSlot> slots;

    const ParameterSlot& slot(const std::string& name) const;
    ParameterSlot& slot(const std::string& name);
    std::vector<std::string> unresolved() const;

    nlohmann::json to_json() const;
    // Structural parse only; throws SchemaViolation. Use validate_aos for catalog conformance.
    static AbstractOptimizationSkeleton from_json(const nlohmann::json& j);
};

struct SlotSpec {
    std::string name;
    SlotCategory category;
    ValueKind kind;
    Provenance source;  // where grounding looks first
    std::string units;
};

struct CatalogEntry {
    ProblemType type;
    std::string objective;
    std::vector<Variable> variables;
    std::vector<std::string> constraints;
    std::vector<SlotSpec> slots;
};

const CatalogEntry& catalog_entry(ProblemType t);
// Skeleton for the type with every slot unresolved and provenance hints set.
AbstractOptimizationSkeleton skeleton_for(ProblemType t);

// Identifiers used in an expression, minus operators and index names.
std::vector<std::string> expression_symbols(const std::string& expr);

// Throws SchemaViolation unless the slot set, categories and value kinds match
// the catalog exactly and every objective/constraint symbol is declared.
void validate_aos(const AbstractOptimizationSkeleton& aos);

// Rule-based extraction. Throws NoCatalogMatch when no problem type applies.
AbstractOptimizationSkeleton extract_aos_baseline(const std::string& text);

// Chat completion (system, user) -> reply text.
using CompletionFn = std::function<std::string(const std::string& system, const std::string& user)>;

struct PsaBackend {
    enum class Kind { baseline, llm } kind = Kind::baseline;
    CompletionFn complete;  // required for llm
};

struct Extraction {
    AbstractOptimizationSkeleton aos;
    bool fallback = false;  // the llm reply was rejected and the rules answered
    std::string fallback_reason;
};

std::string llm_extraction_prompt(const std::string& text);

// NoCatalogMatch propagates from the rules; any llm failure (transport,
// parse, SchemaViolation) falls back to the rules.
Extraction extract_aos(const std::string& text, const PsaBackend& backend = {});

// Type-1 slot values the rules resolved, by slot name.
nlohmann::json type1_values(const AbstractOptimizationSkeleton& aos);

}  // namespace ioev::support
