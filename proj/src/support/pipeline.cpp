#include "ioev/support/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>

#include "ioev/core/text.hpp"

namespace ioev::support {

void VehicleProfile::validate() const {
    require(battery_capacity_kwh > 0.0 && std::isfinite(battery_capacity_kwh), ErrorCode::InvalidArgument,
            "battery capacity must be positive");
    require(max_charge_rate_kw > 0.0 && std::isfinite(max_charge_rate_kw), ErrorCode::InvalidArgument,
            "max charge rate must be positive");
    require(efficiency > 0.0 && efficiency <= 1.0, ErrorCode::InvalidArgument, "efficiency must be in (0, 1]");
    for (const auto& soc : {current_soc, target_soc})
        require(!soc || (*soc >= 0.0 && *soc <= 1.0), ErrorCode::InvalidArgument, "state of charge must be in [0, 1]");
    require(!trip_energy_kwh || *trip_energy_kwh >= 0.0, ErrorCode::InvalidArgument,
            "trip energy must be non-negative");
}

nlohmann::json VehicleProfile::to_json() const {
    nlohmann::json j = {{"battery_capacity_kwh", battery_capacity_kwh},
                        {"max_charge_rate_kw", max_charge_rate_kw},
                        {"efficiency", efficiency}};
    if (current_soc) j["current_soc"] = *current_soc;
    if (target_soc) j["target_soc"] = *target_soc;
    if (trip_energy_kwh) j["trip_energy_kwh"] = *trip_energy_kwh;
    return j;
}

VehicleProfile VehicleProfile::from_json(const nlohmann::json& j) {
    VehicleProfile v;
    try {
        v.battery_capacity_kwh = j.at("battery_capacity_kwh").get<double>();
        v.max_charge_rate_kw = j.at("max_charge_rate_kw").get<double>();
        v.efficiency = j.value("efficiency", kDefaultEfficiency);
        if (j.contains("current_soc")) v.current_soc = j.at("current_soc").get<double>();
        if (j.contains("target_soc")) v.target_soc = j.at("target_soc").get<double>();
        if (j.contains("trip_energy_kwh")) v.trip_energy_kwh = j.at("trip_energy_kwh").get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaViolation, std::string("vehicle profile: ") + e.what());
    }
    v.validate();
    return v;
}

SeriesProvider forecaster_provider(std::shared_ptr<const forecast::Forecaster> model, forecast::SeriesWindow history) {
    require(model != nullptr, ErrorCode::ModelNotLoaded, "price forecaster is not loaded");
    return [model = std::move(model), history = std::move(history)](int slots) {
        return model->forecast_recursive(history, slots);
    };
}

void SessionContext::discard_private() { calendar.clear(); }

size_t clock_slot(const SessionContext& ctx, int hour, int minute) {
    double offset = std::fmod(hour + minute / 60.0 - ctx.horizon_start_hour + 48.0, 24.0);
    auto slot = static_cast<size_t>(std::floor(offset / ctx.slot_hours + 1e-9));
    return std::min(slot, static_cast<size_t>(ctx.horizon_slots));
}

namespace {

// A deadline falling exactly on the horizon start means the end of the horizon.
size_t deadline_slot(const SessionContext& ctx, int hour, int minute) {
    size_t s = clock_slot(ctx, hour, minute);
    return s == 0 ? static_cast<size_t>(ctx.horizon_slots) : s;
}

std::optional<std::pair<int, int>> parse_hhmm(const std::string& s) {
    static const std::regex re(R"(^(\d{1,2}):(\d{2})$)");
    std::smatch m;
    if (!std::regex_match(s, m, re)) return std::nullopt;
    return std::make_pair(std::stoi(m[1]), std::stoi(m[2]));
}

const CalendarEvent* find_event(const SessionContext& ctx, const std::vector<std::string>& keywords) {
    for (const auto& e : ctx.calendar) {
        std::string title = to_lower(e.title);
        for (const auto& k : keywords)
            if (contains(title, k)) return &e;
    }
    return nullptr;
}

const std::vector<std::string>& departure_words() {
    static const std::vector<std::string> w = {"work", "commute", "office", "leave", "depart"};
    return w;
}

const std::vector<std::string>& arrival_words() {
    static const std::vector<std::string> w = {"home", "return", "arrive"};
    return w;
}

std::vector<std::string> milestone_keywords(const std::string& label) {
    if (label == "commute") return departure_words();
    return {label};
}

// Clock time for a named phrase in a milestone.
std::optional<std::pair<int, int>> named_time(const std::string& when) {
    static const std::map<std::string, std::pair<int, int>> times = {
        {"late-night", {23, 0}},     {"tonight", {21, 0}},  {"this evening", {19, 0}},
        {"this afternoon", {15, 0}}, {"tomorrow", {8, 0}},  {"tomorrow morning", {8, 0}}};
    if (auto it = times.find(when); it != times.end()) return it->second;
    return std::nullopt;
}

class Grounder {
public:
    Grounder(const AbstractOptimizationSkeleton& aos, const SessionContext& ctx) : g_(aos), ctx_(ctx) {}

    AbstractOptimizationSkeleton run() {
        for (auto& s : g_.slots)
            if (!s.resolved() && s.category == SlotCategory::type1_explicit) default_type1(s);
        for (auto& s : g_.slots)
            if (!s.resolved()) ground(s);
        return g_;
    }

private:
    AbstractOptimizationSkeleton g_;
    const SessionContext& ctx_;

    static void set(ParameterSlot& s, nlohmann::json v, Provenance p) {
        s.value = std::move(v);
        s.provenance = p;
    }

    [[noreturn]] static void unresolvable(const ParameterSlot& s, const std::string& why) {
        fail(ErrorCode::UnresolvableSlot, "slot '" + s.name + "': " + why);
    }

    const VehicleProfile& vehicle(const ParameterSlot& s) const {
        if (!ctx_.vehicle) unresolvable(s, "no vehicle profile in the session and no default");
        return *ctx_.vehicle;
    }

    void default_type1(ParameterSlot& s) {
        static const std::map<std::string, nlohmann::json> defaults = {
            {"deadline", "tomorrow"},
            {"objective", "minimize_cost"},
            {"location_context", "any"},
            {"cost_weight", kDefaultWeight},
            {"wear_weight", kDefaultWeight},
            {"selection_criterion", "cost"},
            {"milestones", nlohmann::json::array({{{"label", "trip"}, {"when", "unspecified"}}})}};
        auto it = defaults.find(s.name);
        if (it == defaults.end()) unresolvable(s, "not stated in the request and no default");
        set(s, it->second, Provenance::default_value);
    }

    void ground(ParameterSlot& s) {
        const std::string& n = s.name;
        if (n == "battery_capacity") {
            set(s, vehicle(s).battery_capacity_kwh, Provenance::vehicle_profile);
        } else if (n == "max_charge_rate") {
            set(s, vehicle(s).max_charge_rate_kw, Provenance::vehicle_profile);
        } else if (n == "charge_efficiency") {
            if (ctx_.vehicle) set(s, ctx_.vehicle->efficiency, Provenance::vehicle_profile);
            else set(s, kDefaultEfficiency, Provenance::default_value);
        } else if (n == "energy_needed") {
            const auto& v = vehicle(s);
            double now = v.current_soc.value_or(kDefaultCurrentSoc);
            double target = v.target_soc.value_or(kDefaultTargetSoc);
            set(s, std::max(0.0, target - now) * v.battery_capacity_kwh,
                v.current_soc && v.target_soc ? Provenance::vehicle_profile : Provenance::default_value);
        } else if (n == "initial_energy") {
            const auto& v = vehicle(s);
            set(s, v.current_soc.value_or(kDefaultCurrentSoc) * v.battery_capacity_kwh,
                v.current_soc ? Provenance::vehicle_profile : Provenance::default_value);
        } else if (n == "trip_energy") {
            const auto& v = vehicle(s);
            size_t k = g_.slot("milestones").value->size();
            set(s, std::vector<double>(k, v.trip_energy_kwh.value_or(kDefaultTripEnergyKwh)),
                v.trip_energy_kwh ? Provenance::vehicle_profile : Provenance::default_value);
        } else if (n == "price_series") {
            if (!ctx_.prices) unresolvable(s, "no price forecaster in the session");
            auto p = ctx_.prices(ctx_.horizon_slots);
            if (p.size() != static_cast<size_t>(ctx_.horizon_slots) ||
                !std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); }))
                unresolvable(s, "price forecaster returned an unusable series");
            set(s, p, Provenance::forecaster);
        } else if (n == "availability") {
            ground_availability(s);
        } else if (n == "milestone_slots") {
            ground_milestones(s);
        } else if (n == "candidate_stations") {
            if (ctx_.stations.empty()) unresolvable(s, "no candidate stations in the session");
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& c : ctx_.stations) {
                StationOption o = c.option;
                if (c.occupancy) {
                    auto f = c.occupancy(1);
                    if (f.empty() || !std::isfinite(f.front())) unresolvable(s, "occupancy forecast failed");
                    o.occupancy = std::clamp(f.front(), 0.0, 1.0);
                }
                arr.push_back(o.to_json());
            }
            set(s, arr, Provenance::forecaster);
        } else {
            unresolvable(s, "no grounding rule");
        }
    }

    std::string text_or(const std::string& name, const std::string& fallback) const {
        for (const auto& x : g_.slots)
            if (x.name == name && x.value && x.value->is_string()) return x.value->get<std::string>();
        return fallback;
    }

    // Charging window [start, end) from the deadline, location and calendar.
    void ground_availability(ParameterSlot& s) {
        size_t start = 0, end = static_cast<size_t>(ctx_.horizon_slots);
        bool from_calendar = false;
        std::string loc = text_or("location_context", "any");
        if (loc == "homeward" || loc == "home") {
            if (const auto* e = find_event(ctx_, arrival_words())) {
                start = clock_slot(ctx_, e->hour, e->minute);
                from_calendar = true;
            }
        }
        std::string deadline = text_or("deadline", "");
        if (auto hm = parse_hhmm(deadline)) {
            end = deadline_slot(ctx_, hm->first, hm->second);
        } else if (deadline == "tonight") {
            end = deadline_slot(ctx_, 0, 0);
        } else if (deadline.empty()) {
            // milestones bound the deadline problem
        } else if (const auto* e = find_event(ctx_, departure_words())) {
            end = deadline_slot(ctx_, e->hour, e->minute);
            from_calendar = true;
        }
        std::vector<double> mask(ctx_.horizon_slots, 0.0);
        for (size_t t = start; t < end; ++t) mask[t] = 1.0;
        set(s, mask, from_calendar ? Provenance::calendar : Provenance::default_value);
    }

    void ground_milestones(ParameterSlot& s) {
        std::vector<double> slots;
        bool from_calendar = false;
        for (const auto& m : *g_.slot("milestones").value) {
            auto label = m.value("label", "trip");
            auto when = m.value("when", "unspecified");
            size_t slot = static_cast<size_t>(ctx_.horizon_slots);
            if (const auto* e = find_event(ctx_, milestone_keywords(label))) {
                slot = deadline_slot(ctx_, e->hour, e->minute);
                from_calendar = true;
            } else if (auto hm = parse_hhmm(when)) {
                slot = deadline_slot(ctx_, hm->first, hm->second);
            } else if (auto nt = named_time(when)) {
                slot = deadline_slot(ctx_, nt->first, nt->second);
            }
            slots.push_back(static_cast<double>(slot));
        }
        set(s, slots, from_calendar ? Provenance::calendar : Provenance::default_value);
    }
};

double num(const AbstractOptimizationSkeleton& a, const std::string& name) {
    return a.slot(name).value->get<double>();
}

std::vector<double> list(const AbstractOptimizationSkeleton& a, const std::string& name) {
    return a.slot(name).value->get<std::vector<double>>();
}

ChargingCostProblem charging_base(const AbstractOptimizationSkeleton& a, const SessionContext& ctx) {
    ChargingCostProblem c;
    c.prices = list(a, "price_series");
    c.slot_hours = ctx.slot_hours;
    c.max_power = num(a, "max_charge_rate");
    c.efficiency = num(a, "charge_efficiency");
    c.start_hour = ctx.horizon_start_hour;
    auto mask = list(a, "availability");
    require(mask.size() == c.prices.size(), ErrorCode::LengthMismatch,
            "availability and price series lengths differ");
    for (double v : mask) c.available.push_back(v > 0.5);
    return c;
}

}  // namespace

ProblemInstance instantiate(const AbstractOptimizationSkeleton& a, const SessionContext& ctx) {
    for (const auto& s : a.slots)
        require(s.resolved(), ErrorCode::UnresolvableSlot, "slot '" + s.name + "' is unresolved");
    try {
        double capacity = num(a, "battery_capacity");
        switch (a.problem_type) {
            case ProblemType::cost_min_charging: {
                auto c = charging_base(a, ctx);
                c.energy_needed = num(a, "energy_needed");
                require(c.energy_needed <= capacity, ErrorCode::InvalidArgument,
                        "energy needed exceeds the battery capacity");
                return c;
            }
            case ProblemType::multi_objective_weighted: {
                WeightedChargingProblem w;
                w.charging = charging_base(a, ctx);
                w.charging.energy_needed = num(a, "energy_needed");
                require(w.charging.energy_needed <= capacity, ErrorCode::InvalidArgument,
                        "energy needed exceeds the battery capacity");
                w.cost_weight = num(a, "cost_weight");
                w.wear_weight = num(a, "wear_weight");
                return w;
            }
            case ProblemType::deadline_feasibility: {
                DeadlineProblem d;
                d.charging = charging_base(a, ctx);
                const auto& ms = *a.slot("milestones").value;
                auto slots = list(a, "milestone_slots");
                auto trips = list(a, "trip_energy");
                require(slots.size() == ms.size() && trips.size() == ms.size(), ErrorCode::LengthMismatch,
                        "milestone slots, trips and milestones differ in length");
                std::vector<size_t> order(ms.size());
                for (size_t i = 0; i < order.size(); ++i) order[i] = i;
                std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) { return slots[x] < slots[y]; });
                double initial = num(a, "initial_energy"), trips_so_far = 0.0;
                for (size_t i : order) {
                    trips_so_far += trips[i];
                    d.milestones.push_back({ms[i].value("label", "trip"), static_cast<size_t>(slots[i]),
                                            std::max(0.0, trips_so_far - initial)});
                }
                d.headroom = std::max(0.0, capacity - initial);
                return d;
            }
            case ProblemType::station_selection: {
                StationSelectionProblem p;
                for (const auto& s : *a.slot("candidate_stations").value) p.stations.push_back(StationOption::from_json(s));
                p.criterion = a.slot("selection_criterion").value->get<std::string>();
                p.energy_needed = num(a, "energy_needed");
                p.max_charge_rate = num(a, "max_charge_rate");
                p.efficiency = num(a, "charge_efficiency");
                return p;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaViolation, std::string("slot value has the wrong shape: ") + e.what());
    }
    fail(ErrorCode::InvalidArgument, "unknown problem type");
}

GroundedProblem ground_parameters(const AbstractOptimizationSkeleton& aos, const SessionContext& ctx) {
    validate_aos(aos);
    require(ctx.horizon_slots > 0 && ctx.slot_hours > 0.0, ErrorCode::InvalidArgument, "empty planning horizon");
    if (ctx.vehicle) ctx.vehicle->validate();
    auto grounded = Grounder(aos, ctx).run();
    validate_aos(grounded);
    auto instance = instantiate(grounded, ctx);
    return {std::move(grounded), std::move(instance)};
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::psa: return "PSA";
        case Stage::ca: return "CA";
        case Stage::sa: return "SA";
    }
    return "?";
}

namespace {

std::string bare_message(const Error& e) {
    std::string w = e.what(), prefix = std::string(ioev::to_string(e.code())) + ": ";
    return starts_with(w, prefix) ? w.substr(prefix.size()) : w;
}

}  // namespace

PipelineError::PipelineError(Stage stage, const Error& cause)
    : Error(cause.code(), "[" + to_string(stage) + "] " + bare_message(cause)), stage_(stage) {}

nlohmann::json PipelineResult::to_json() const {
    nlohmann::json j = {{"clarification", clarification}, {"narrative", narrative}, {"trace", trace}};
    j["plan"] = plan ? plan->to_json() : nlohmann::json(nullptr);
    j["validation"] = validation ? validation->to_json() : nlohmann::json(nullptr);
    return j;
}

namespace {

nlohmann::json provenances(const AbstractOptimizationSkeleton& a) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& s : a.slots) j[s.name] = to_string(s.provenance);
    return j;
}

const char* kClarification =
    "I can plan charging for the lowest cost, around trips and deadlines, at the best nearby station, or balancing "
    "cost against battery wear. Which of these do you need, and by when?";

}  // namespace

PipelineResult pipeline_run(const intent::QueryText& q, const SessionContext& ctx, const PipelineOptions& opts) {
    require(!q.preset_label() || *q.preset_label() == intent::IntentLabel::user_support, ErrorCode::InvalidArgument,
            "the support pipeline only serves user-support queries");
    PipelineResult r;
    r.trace = {{"query", q.text()}};

    Extraction ex;
    try {
        ex = extract_aos(q.text(), opts.psa);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoCatalogMatch) throw PipelineError(Stage::psa, e);
        r.clarification = true;
        r.narrative = kClarification;
        r.trace["stage"] = to_string(Stage::psa);
        r.trace["reason"] = e.what();
        return r;
    }
    r.trace["extraction"] = {{"backend", opts.psa.kind == PsaBackend::Kind::llm ? "llm" : "baseline"},
                             {"fallback", ex.fallback},
                             {"fallback_reason", ex.fallback_reason}};
    r.trace["aos"] = ex.aos.to_json();

    GroundedProblem gp;
    try {
        gp = ground_parameters(ex.aos, ctx);
    } catch (const Error& e) {
        throw PipelineError(Stage::ca, e);
    }
    r.trace["grounded"] = gp.aos.to_json();
    r.trace["provenance"] = provenances(gp.aos);
    r.trace["instance"] = problem_to_json(gp.instance);

    SolutionPlan plan;
    try {
        plan = solve(gp.instance, opts.registry ? *opts.registry : SolverRegistry::defaults());
    } catch (const Error& e) {
        throw PipelineError(Stage::sa, e);
    }
    if (plan.feasible) {
        auto report = validate_plan(gp.instance, plan);
        if (!report.ok()) {
            // A plan that fails its own constraints is never returned as feasible.
            plan.feasible = false;
            for (const auto& c : report.checks)
                if (!c.satisfied) plan.violations.push_back(c.constraint);
            plan.narrative = "No verified plan: the solver output violated " + plan.violations.front() + ".";
        }
        r.validation = std::move(report);
    }
    r.trace["solver"] = plan.solver_name;
    r.narrative = plan.narrative;
    r.plan = std::move(plan);
    return r;
}

}  // namespace ioev::support
