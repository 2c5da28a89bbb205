#include "ioev/support/aos.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>
#include <utility>

#include "ioev/core/error.hpp"

namespace ioev::support {

namespace {

template <typename E, size_t N>
E parse_enum(const std::string& s, const std::array<std::pair<E, const char*>, N>& table, const char* what) {
    for (const auto& [e, name] : table)
        if (s == name) return e;
    fail(ErrorCode::SchemaViolation, std::string("unknown ") + what + " '" + s + "'");
}

template <typename E, size_t N>
std::string enum_name(E e, const std::array<std::pair<E, const char*>, N>& table) {
    for (const auto& [v, name] : table)
        if (v == e) return name;
    return "?";
}

const std::array<std::pair<ProblemType, const char*>, 4> kTypes = {{
    {ProblemType::cost_min_charging, "cost_min_charging"},
    {ProblemType::deadline_feasibility, "deadline_feasibility"},
    {ProblemType::station_selection, "station_selection"},
    {ProblemType::multi_objective_weighted, "multi_objective_weighted"},
}};
const std::array<std::pair<SlotCategory, const char*>, 2> kCategories = {{
    {SlotCategory::type1_explicit, "type1_explicit"},
    {SlotCategory::type2_physical, "type2_physical"},
}};
const std::array<std::pair<Provenance, const char*>, 5> kProvenances = {{
    {Provenance::request_text, "request_text"},
    {Provenance::vehicle_profile, "vehicle_profile"},
    {Provenance::forecaster, "forecaster"},
    {Provenance::calendar, "calendar"},
    {Provenance::default_value, "default"},
}};

// Operators, index names and fixed constants that may appear in expressions.
const std::set<std::string>& reserved_words() {
    static const std::set<std::string> w = {"minimize", "over", "in", "for", "each", "sum_",
                                            "sum_t", "t", "k", "j", "slot_hours", "criterion_cost"};
    return w;
}

using K = ValueKind;
using P = Provenance;
constexpr auto T1 = SlotCategory::type1_explicit;
constexpr auto T2 = SlotCategory::type2_physical;

const std::vector<CatalogEntry>& catalog() {
    static const Variable power{"x", "[0, max_charge_rate] per slot", "kW"};
    static const std::string energy_cost = "sum_t price_series[t] * x[t] * slot_hours";
    static const std::string box = "0 <= x[t] <= availability[t] * max_charge_rate";
    static const std::vector<CatalogEntry> entries = {
        {ProblemType::cost_min_charging,
         "minimize " + energy_cost,
         {power},
         {"sum_t charge_efficiency * x[t] * slot_hours = energy_needed", box, "energy_needed <= battery_capacity"},
         {{"deadline", T1, K::text, P::request_text, ""},
          {"objective", T1, K::text, P::request_text, ""},
          {"location_context", T1, K::text, P::request_text, ""},
          {"battery_capacity", T2, K::number, P::vehicle_profile, "kWh"},
          {"max_charge_rate", T2, K::number, P::vehicle_profile, "kW"},
          {"charge_efficiency", T2, K::number, P::vehicle_profile, ""},
          {"energy_needed", T2, K::number, P::vehicle_profile, "kWh"},
          {"price_series", T2, K::number_list, P::forecaster, "currency/kWh"},
          {"availability", T2, K::number_list, P::calendar, ""}}},
        {ProblemType::deadline_feasibility,
         "minimize " + energy_cost,
         {power},
         {"initial_energy + sum_{t < milestone_slots[k]} charge_efficiency * x[t] * slot_hours >= "
          "sum_{j <= k} trip_energy[j] for each k",
          box, "initial_energy + sum_t charge_efficiency * x[t] * slot_hours <= battery_capacity"},
         {{"milestones", T1, K::object_list, P::request_text, ""},
          {"battery_capacity", T2, K::number, P::vehicle_profile, "kWh"},
          {"max_charge_rate", T2, K::number, P::vehicle_profile, "kW"},
          {"charge_efficiency", T2, K::number, P::vehicle_profile, ""},
          {"initial_energy", T2, K::number, P::vehicle_profile, "kWh"},
          {"trip_energy", T2, K::number_list, P::vehicle_profile, "kWh"},
          {"price_series", T2, K::number_list, P::forecaster, "currency/kWh"},
          {"availability", T2, K::number_list, P::calendar, ""},
          {"milestone_slots", T2, K::number_list, P::calendar, "slot"}}},
        {ProblemType::station_selection,
         "minimize criterion_cost(s, selection_criterion, energy_needed, charge_efficiency, max_charge_rate) "
         "over s in candidate_stations",
         {{"s", "candidate_stations", "index"}},
         {"s in candidate_stations", "energy_needed <= battery_capacity"},
         {{"selection_criterion", T1, K::text, P::request_text, ""},
          {"candidate_stations", T2, K::object_list, P::forecaster, ""},
          {"battery_capacity", T2, K::number, P::vehicle_profile, "kWh"},
          {"max_charge_rate", T2, K::number, P::vehicle_profile, "kW"},
          {"charge_efficiency", T2, K::number, P::vehicle_profile, ""},
          {"energy_needed", T2, K::number, P::vehicle_profile, "kWh"}}},
        {ProblemType::multi_objective_weighted,
         "minimize cost_weight * " + energy_cost + " + wear_weight * sum_t x[t]^2 * slot_hours / max_charge_rate",
         {power},
         {"sum_t charge_efficiency * x[t] * slot_hours = energy_needed", box, "energy_needed <= battery_capacity"},
         {{"deadline", T1, K::text, P::request_text, ""},
          {"cost_weight", T1, K::number, P::request_text, ""},
          {"wear_weight", T1, K::number, P::request_text, ""},
          {"battery_capacity", T2, K::number, P::vehicle_profile, "kWh"},
          {"max_charge_rate", T2, K::number, P::vehicle_profile, "kW"},
          {"charge_efficiency", T2, K::number, P::vehicle_profile, ""},
          {"energy_needed", T2, K::number, P::vehicle_profile, "kWh"},
          {"price_series", T2, K::number_list, P::forecaster, "currency/kWh"},
          {"availability", T2, K::number_list, P::calendar, ""}}},
    };
    return entries;
}

bool kind_matches(ValueKind k, const nlohmann::json& v) {
    switch (k) {
        case ValueKind::text:
            return v.is_string();
        case ValueKind::number:
            return v.is_number();
        case ValueKind::number_list:
            return v.is_array() && std::all_of(v.begin(), v.end(), [](const auto& e) { return e.is_number(); });
        case ValueKind::object_list:
            return v.is_array() && std::all_of(v.begin(), v.end(), [](const auto& e) { return e.is_object(); });
    }
    return false;
}

}  // namespace

std::string to_string(ProblemType t) { return enum_name(t, kTypes); }
ProblemType parse_problem_type(const std::string& s) { return parse_enum(s, kTypes, "problem type"); }
std::string to_string(SlotCategory c) { return enum_name(c, kCategories); }
SlotCategory parse_slot_category(const std::string& s) { return parse_enum(s, kCategories, "slot category"); }
std::string to_string(Provenance p) { return enum_name(p, kProvenances); }
Provenance parse_provenance(const std::string& s) { return parse_enum(s, kProvenances, "provenance"); }

const std::vector<ProblemType>& all_problem_types() {
    static const std::vector<ProblemType> all = {ProblemType::cost_min_charging, ProblemType::deadline_feasibility,
                                                 ProblemType::station_selection, ProblemType::multi_objective_weighted};
    return all;
}

const ParameterSlot& AbstractOptimizationSkeleton::slot(const std::string& name) const {
    for (const auto& s : slots)
        if (s.name == name) return s;
    fail(ErrorCode::InvalidArgument, "skeleton has no slot '" + name + "'");
}

ParameterSlot& AbstractOptimizationSkeleton::slot(const std::string& name) {
    return const_cast<ParameterSlot&>(std::as_const(*this).slot(name));
}

std::vector<std::string> AbstractOptimizationSkeleton::unresolved() const {
    std::vector<std::string> out;
    for (const auto& s : slots)
        if (!s.resolved()) out.push_back(s.name);
    return out;
}

nlohmann::json AbstractOptimizationSkeleton::to_json() const {
    nlohmann::json vars = nlohmann::json::array(), sl = nlohmann::json::array();
    for (const auto& v : variables) vars.push_back({{"name", v.name}, {"domain", v.domain}, {"units", v.units}});
    for (const auto& s : slots) {
        nlohmann::json j = {{"name", s.name},
                            {"category", to_string(s.category)},
                            {"status", s.resolved() ? "resolved" : "unresolved"},
                            {"provenance", to_string(s.provenance)}};
        if (s.value) j["value"] = *s.value;
        sl.push_back(std::move(j));
    }
    return {{"schema", kAosSchemaVersion}, {"problem_type", to_string(problem_type)},
            {"objective", objective},      {"variables", vars},
            {"constraints", constraints},  {"slots", sl}};
}

AbstractOptimizationSkeleton AbstractOptimizationSkeleton::from_json(const nlohmann::json& j) {
    try {
        require(j.is_object(), ErrorCode::SchemaViolation, "skeleton must be a JSON object");
        if (j.contains("schema"))
            require(j.at("schema") == kAosSchemaVersion, ErrorCode::SchemaViolation, "unsupported skeleton schema");
        AbstractOptimizationSkeleton a;
        a.problem_type = parse_problem_type(j.at("problem_type").get<std::string>());
        a.objective = j.at("objective").get<std::string>();
        for (const auto& v : j.at("variables"))
            a.variables.push_back({v.at("name").get<std::string>(), v.value("domain", ""), v.value("units", "")});
        a.constraints = j.at("constraints").get<std::vector<std::string>>();
        for (const auto& s : j.at("slots")) {
            ParameterSlot p;
            p.name = s.at("name").get<std::string>();
            p.category = parse_slot_category(s.at("category").get<std::string>());
            p.provenance = parse_provenance(s.at("provenance").get<std::string>());
            auto status = s.at("status").get<std::string>();
            require(status == "resolved" || status == "unresolved", ErrorCode::SchemaViolation,
                    "slot status must be resolved or unresolved");
            bool has_value = s.contains("value") && !s.at("value").is_null();
            require(has_value == (status == "resolved"), ErrorCode::SchemaViolation,
                    "slot '" + p.name + "' status disagrees with its value");
            if (has_value) p.value = s.at("value");
            a.slots.push_back(std::move(p));
        }
        return a;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaViolation, std::string("malformed skeleton: ") + e.what());
    }
}

const CatalogEntry& catalog_entry(ProblemType t) {
    for (const auto& e : catalog())
        if (e.type == t) return e;
    fail(ErrorCode::NoCatalogMatch, "problem type missing from catalog");
}

AbstractOptimizationSkeleton skeleton_for(ProblemType t) {
    const auto& e = catalog_entry(t);
    AbstractOptimizationSkeleton a;
    a.problem_type = t;
    a.objective = e.objective;
    a.variables = e.variables;
    a.constraints = e.constraints;
    for (const auto& s : e.slots) a.slots.push_back({s.name, s.category, std::nullopt, s.source});
    return a;
}

std::vector<std::string> expression_symbols(const std::string& expr) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty() && !reserved_words().count(cur)) out.push_back(cur);
        cur.clear();
    };
    for (size_t i = 0; i < expr.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(expr[i]);
        bool ident = std::isalpha(c) || c == '_' || (!cur.empty() && std::isdigit(c));
        if (ident) {
            cur += static_cast<char>(c);
        } else {
            flush();
        }
    }
    flush();
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void validate_aos(const AbstractOptimizationSkeleton& aos) {
    const auto& e = catalog_entry(aos.problem_type);
    require(!aos.objective.empty(), ErrorCode::SchemaViolation, "objective is empty");
    require(!aos.constraints.empty(), ErrorCode::SchemaViolation, "constraint list is empty");
    require(!aos.variables.empty(), ErrorCode::SchemaViolation, "variable list is empty");

    std::map<std::string, const SlotSpec*> specs;
    for (const auto& s : e.slots) specs[s.name] = &s;
    std::set<std::string> seen;
    for (const auto& s : aos.slots) {
        auto it = specs.find(s.name);
        require(it != specs.end(), ErrorCode::SchemaViolation,
                "slot '" + s.name + "' is not part of " + to_string(aos.problem_type));
        require(seen.insert(s.name).second, ErrorCode::SchemaViolation, "duplicate slot '" + s.name + "'");
        require(s.category == it->second->category, ErrorCode::SchemaViolation,
                "slot '" + s.name + "' has the wrong category");
        if (s.value)
            require(kind_matches(it->second->kind, *s.value), ErrorCode::SchemaViolation,
                    "slot '" + s.name + "' has a value of the wrong shape");
    }
    for (const auto& s : e.slots)
        require(seen.count(s.name) == 1, ErrorCode::SchemaViolation, "missing slot '" + s.name + "'");

    std::set<std::string> declared(seen.begin(), seen.end());
    for (const auto& v : aos.variables) {
        require(!v.name.empty(), ErrorCode::SchemaViolation, "variable without a name");
        declared.insert(v.name);
    }
    auto check = [&](const std::string& expr) {
        for (const auto& sym : expression_symbols(expr))
            require(declared.count(sym) == 1, ErrorCode::SchemaViolation,
                    "symbol '" + sym + "' is neither a variable nor a slot");
    };
    check(aos.objective);
    for (const auto& c : aos.constraints) check(c);
}

nlohmann::json type1_values(const AbstractOptimizationSkeleton& aos) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& s : aos.slots)
        if (s.category == SlotCategory::type1_explicit && s.value && s.provenance == Provenance::request_text)
            j[s.name] = *s.value;
    return j;
}

}  // namespace ioev::support
