#include "ioev/support/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ioev/core/error.hpp"

namespace ioev::support {

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string clock_label(int start_hour, double hours) {
    double h = std::fmod(start_hour + hours, 24.0);
    if (h < 0) h += 24.0;
    int minutes = static_cast<int>(std::lround(h * 60.0)) % (24 * 60);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d", minutes / 60, minutes % 60);
    return buf;
}

std::string schedule_narrative(const ChargingCostProblem& p, const std::vector<double>& x) {
    std::string s;
    for (size_t t = 0; t < x.size(); ++t) {
        if (x[t] <= 1e-9) continue;
        s += s.empty() ? "Charge at " : ", ";
        s += fmt("%.1f", x[t]) + " kW " + clock_label(p.start_hour, t * p.slot_hours) + "-" +
             clock_label(p.start_hour, (t + 1) * p.slot_hours);
    }
    if (s.empty()) s = "No charging needed";
    double delivered = 0.0;
    for (double v : x) delivered += p.efficiency * v * p.slot_hours;
    return s + ". Delivers " + fmt("%.2f", delivered) + " kWh";
}

// Available slots ordered by price, earlier slot first on ties.
std::vector<size_t> cheapest_first(const ChargingCostProblem& p, size_t limit) {
    std::vector<size_t> order;
    for (size_t t = 0; t < std::min(limit, p.slots()); ++t)
        if (p.is_available(t)) order.push_back(t);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return p.prices[a] < p.prices[b]; });
    return order;
}

// Greedy fill of `amount` kWh into the given slots on top of x; returns what could not be placed.
double fill(const ChargingCostProblem& p, const std::vector<size_t>& order, std::vector<double>& x, double amount) {
    const double per_kw = p.efficiency * p.slot_hours;
    for (size_t t : order) {
        if (amount <= 0.0) break;
        double room = (p.max_power - x[t]) * per_kw;
        if (room <= 0.0) continue;
        double take = std::min(room, amount);
        x[t] = take == room ? p.max_power : x[t] + take / per_kw;
        amount -= take;
    }
    return amount;
}

// Relative slack below which leftover energy counts as delivered.
bool negligible(double leftover, double scale) { return leftover <= 1e-12 * std::max(1.0, scale); }

}  // namespace

double ChargingCostProblem::capacity() const {
    double c = 0.0;
    for (size_t t = 0; t < slots(); ++t)
        if (is_available(t)) c += max_power * efficiency * slot_hours;
    return c;
}

void ChargingCostProblem::validate() const {
    require(!prices.empty(), ErrorCode::InvalidArgument, "price series is empty");
    require(available.empty() || available.size() == prices.size(), ErrorCode::InvalidArgument,
            "availability mask length differs from the price series");
    for (double v : prices) require(std::isfinite(v), ErrorCode::InvalidArgument, "non-finite price");
    require(slot_hours > 0.0 && std::isfinite(slot_hours), ErrorCode::InvalidArgument, "slot length must be positive");
    require(energy_needed >= 0.0 && std::isfinite(energy_needed), ErrorCode::InvalidArgument,
            "energy needed must be non-negative");
    require(max_power > 0.0 && std::isfinite(max_power), ErrorCode::InvalidArgument, "max power must be positive");
    require(efficiency > 0.0 && efficiency <= 1.0, ErrorCode::InvalidArgument, "efficiency must be in (0, 1]");
}

nlohmann::json ChargingCostProblem::to_json() const {
    std::vector<int> mask;
    for (size_t t = 0; t < slots(); ++t) mask.push_back(is_available(t) ? 1 : 0);
    return {{"prices", prices},       {"slot_hours", slot_hours}, {"energy_needed", energy_needed},
            {"max_power", max_power}, {"availability", mask},     {"efficiency", efficiency},
            {"start_hour", start_hour}};
}

void DeadlineProblem::validate() const {
    ChargingCostProblem c = charging;
    c.energy_needed = 0.0;
    c.validate();
    require(!milestones.empty(), ErrorCode::InvalidArgument, "deadline problem needs at least one milestone");
    require(headroom >= 0.0 && std::isfinite(headroom), ErrorCode::InvalidArgument, "headroom must be non-negative");
    for (const auto& m : milestones) {
        require(m.slot <= charging.slots(), ErrorCode::InvalidArgument, "milestone beyond the horizon");
        require(m.required >= 0.0 && std::isfinite(m.required), ErrorCode::InvalidArgument,
                "milestone requirement must be non-negative");
    }
}

nlohmann::json DeadlineProblem::to_json() const {
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& m : milestones) ms.push_back({{"label", m.label}, {"slot", m.slot}, {"required", m.required}});
    return {{"charging", charging.to_json()}, {"milestones", ms}, {"headroom", headroom}};
}

nlohmann::json StationOption::to_json() const {
    return {{"station_id", station_id},
            {"distance_km", distance_km},
            {"price_per_kwh", price_per_kwh},
            {"max_power_kw", max_power_kw},
            {"occupancy", occupancy}};
}

StationOption StationOption::from_json(const nlohmann::json& j) {
    return {j.at("station_id").get<std::string>(), j.at("distance_km").get<double>(),
            j.at("price_per_kwh").get<double>(), j.at("max_power_kw").get<double>(), j.value("occupancy", 0.0)};
}

void StationSelectionProblem::validate() const {
    require(!stations.empty(), ErrorCode::InvalidArgument, "no candidate stations");
    require(stations.size() <= kMaxStations, ErrorCode::InvalidArgument,
            "at most " + std::to_string(kMaxStations) + " stations are enumerated");
    require(criterion == "cost" || criterion == "time" || criterion == "distance", ErrorCode::InvalidArgument,
            "unknown selection criterion '" + criterion + "'");
    require(energy_needed >= 0.0 && max_charge_rate > 0.0 && efficiency > 0.0 && efficiency <= 1.0,
            ErrorCode::InvalidArgument, "invalid vehicle parameters");
    for (const auto& s : stations) {
        require(s.distance_km >= 0.0 && s.max_power_kw > 0.0 && s.occupancy >= 0.0 && s.occupancy <= 1.0,
                ErrorCode::InvalidArgument, "invalid station '" + s.station_id + "'");
    }
}

nlohmann::json StationSelectionProblem::to_json() const {
    nlohmann::json st = nlohmann::json::array();
    for (const auto& s : stations) st.push_back(s.to_json());
    return {{"stations", st},
            {"criterion", criterion},
            {"energy_needed", energy_needed},
            {"max_charge_rate", max_charge_rate},
            {"efficiency", efficiency},
            {"detour_cost_per_km", detour_cost_per_km},
            {"avg_speed_kmh", avg_speed_kmh},
            {"full_wait_hours", full_wait_hours}};
}

void WeightedChargingProblem::validate() const {
    charging.validate();
    require(cost_weight >= 0.0 && wear_weight >= 0.0 && cost_weight + wear_weight > 0.0, ErrorCode::InvalidArgument,
            "weights must be non-negative and not both zero");
}

nlohmann::json WeightedChargingProblem::to_json() const {
    return {{"charging", charging.to_json()}, {"cost_weight", cost_weight}, {"wear_weight", wear_weight}};
}

ProblemType problem_type_of(const ProblemInstance& p) {
    switch (p.index()) {
        case 0: return ProblemType::cost_min_charging;
        case 1: return ProblemType::deadline_feasibility;
        case 2: return ProblemType::station_selection;
        default: return ProblemType::multi_objective_weighted;
    }
}

nlohmann::json problem_to_json(const ProblemInstance& p) {
    auto body = std::visit([](const auto& q) { return q.to_json(); }, p);
    return {{"problem_type", to_string(problem_type_of(p))}, {"instance", body}};
}

nlohmann::json SolutionPlan::to_json() const {
    nlohmann::json j = {{"schema", kPlanSchemaVersion},
                        {"problem_type", to_string(problem_type)},
                        {"schedule_kw", schedule_kw},
                        {"objective_value", objective_value},
                        {"feasible", feasible},
                        {"solver", solver_name},
                        {"narrative", narrative},
                        {"violations", violations}};
    j["selected_station"] = selected_station ? nlohmann::json(*selected_station) : nlohmann::json(nullptr);
    return j;
}

SolutionPlan SolutionPlan::from_json(const nlohmann::json& j) {
    try {
        SolutionPlan p;
        p.problem_type = parse_problem_type(j.at("problem_type").get<std::string>());
        p.schedule_kw = j.at("schedule_kw").get<std::vector<double>>();
        p.objective_value = j.at("objective_value").get<double>();
        p.feasible = j.at("feasible").get<bool>();
        p.solver_name = j.at("solver").get<std::string>();
        p.narrative = j.at("narrative").get<std::string>();
        p.violations = j.at("violations").get<std::vector<std::string>>();
        if (j.contains("selected_station") && !j.at("selected_station").is_null())
            p.selected_station = j.at("selected_station").get<std::string>();
        return p;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("malformed plan: ") + e.what());
    }
}

double energy_cost(const ChargingCostProblem& p, const std::vector<double>& x) {
    double c = 0.0;
    for (size_t t = 0; t < x.size(); ++t) c += p.prices[t] * x[t] * p.slot_hours;
    return c;
}

double weighted_objective(const WeightedChargingProblem& p, const std::vector<double>& x) {
    double wear = 0.0;
    for (double v : x) wear += v * v * p.charging.slot_hours / p.charging.max_power;
    return p.cost_weight * energy_cost(p.charging, x) + p.wear_weight * wear;
}

double station_score(const StationSelectionProblem& p, size_t i) {
    const auto& s = p.stations.at(i);
    if (p.criterion == "distance") return s.distance_km;
    if (p.criterion == "time") {
        double power = std::min(s.max_power_kw, p.max_charge_rate);
        return 2.0 * s.distance_km / p.avg_speed_kmh + s.occupancy * p.full_wait_hours +
               p.energy_needed / (p.efficiency * power);
    }
    return s.price_per_kwh * p.energy_needed / p.efficiency + p.detour_cost_per_km * 2.0 * s.distance_km;
}

SolutionPlan lp_charging_solve(const ChargingCostProblem& p) {
    p.validate();
    double cap = p.capacity();
    if (p.energy_needed > cap && !negligible(p.energy_needed - cap, p.energy_needed))
        fail(ErrorCode::Infeasible, "energy: " + fmt("%.4g", p.energy_needed) + " kWh needed but only " +
                                        fmt("%.4g", cap) + " kWh can be delivered in the available slots");
    std::vector<double> x(p.slots(), 0.0);
    double left = fill(p, cheapest_first(p, p.slots()), x, p.energy_needed);
    if (!negligible(left, p.energy_needed))
        fail(ErrorCode::Infeasible, "energy: " + fmt("%.4g", left) + " kWh could not be placed");
    SolutionPlan plan;
    plan.problem_type = ProblemType::cost_min_charging;
    plan.schedule_kw = std::move(x);
    plan.objective_value = energy_cost(p, plan.schedule_kw);
    plan.feasible = true;
    plan.solver_name = "greedy-lp";
    plan.narrative = schedule_narrative(p, plan.schedule_kw) + " for " + fmt("%.2f", plan.objective_value) + ".";
    return plan;
}

SolutionPlan deadline_solve(const DeadlineProblem& p) {
    p.validate();
    const auto& c = p.charging;
    SolutionPlan plan;
    plan.problem_type = ProblemType::deadline_feasibility;
    plan.solver_name = "milestone-greedy";
    plan.schedule_kw.assign(c.slots(), 0.0);

    auto ms = p.milestones;
    std::stable_sort(ms.begin(), ms.end(), [](const Milestone& a, const Milestone& b) { return a.slot < b.slot; });
    const double per_kw = c.efficiency * c.slot_hours;
    double target = 0.0;
    for (const auto& m : ms) {
        target = std::max(target, m.required);
        double prefix = 0.0;
        for (size_t t = 0; t < m.slot; ++t) prefix += plan.schedule_kw[t] * per_kw;
        double deficit = target - prefix;
        if (deficit <= 0.0) continue;
        double left = fill(c, cheapest_first(c, m.slot), plan.schedule_kw, deficit);
        if (!negligible(left, target))
            plan.violations.push_back("milestone:" + m.label + ": short by " + fmt("%.4g", left) + " kWh before " +
                                      clock_label(c.start_hour, m.slot * c.slot_hours));
    }
    if (target > p.headroom && !negligible(target - p.headroom, target))
        plan.violations.push_back("battery_capacity: " + fmt("%.4g", target) + " kWh needed but only " +
                                  fmt("%.4g", p.headroom) + " kWh of headroom");
    plan.feasible = plan.violations.empty();
    if (!plan.feasible) {
        plan.schedule_kw.assign(c.slots(), 0.0);
        plan.narrative = "The trips cannot all be covered: " + plan.violations.front() + ".";
        return plan;
    }
    plan.objective_value = energy_cost(c, plan.schedule_kw);
    plan.narrative = schedule_narrative(c, plan.schedule_kw) + " for " + fmt("%.2f", plan.objective_value) + ".";
    return plan;
}

SolutionPlan station_select(const StationSelectionProblem& p) {
    p.validate();
    size_t best = 0;
    double best_score = station_score(p, 0);
    for (size_t i = 1; i < p.stations.size(); ++i) {
        double s = station_score(p, i);
        if (s < best_score) {
            best = i;
            best_score = s;
        }
    }
    SolutionPlan plan;
    plan.problem_type = ProblemType::station_selection;
    plan.solver_name = "station-enumeration";
    plan.feasible = true;
    plan.selected_station = p.stations[best].station_id;
    plan.objective_value = best_score;
    const auto& s = p.stations[best];
    plan.narrative = "Go to station " + s.station_id + " (" + fmt("%.1f", s.distance_km) + " km, " +
                     fmt("%.2f", s.price_per_kwh) + "/kWh, expected occupancy " + fmt("%.0f", 100 * s.occupancy) +
                     "%), best by " + p.criterion + ".";
    return plan;
}

SolutionPlan weighted_charging_solve(const WeightedChargingProblem& p) {
    p.validate();
    const auto& c = p.charging;
    if (p.wear_weight == 0.0) {
        auto plan = lp_charging_solve(c);
        plan.problem_type = ProblemType::multi_objective_weighted;
        plan.solver_name = "kkt-waterfill";
        plan.objective_value = weighted_objective(p, plan.schedule_kw);
        return plan;
    }
    double cap = c.capacity();
    if (c.energy_needed > cap && !negligible(c.energy_needed - cap, c.energy_needed))
        fail(ErrorCode::Infeasible, "energy: " + fmt("%.4g", c.energy_needed) + " kWh needed but only " +
                                        fmt("%.4g", cap) + " kWh can be delivered in the available slots");

    // Stationarity: x_t(lambda) = clip((lambda * eta - w_c * p_t) * P / (2 * w_w), 0, P).
    const double eta = c.efficiency, P = c.max_power, dt = c.slot_hours;
    const double scale = P / (2.0 * p.wear_weight);
    auto x_at = [&](double lambda, size_t t) {
        if (!c.is_available(t)) return 0.0;
        return std::clamp((lambda * eta - p.cost_weight * c.prices[t]) * scale, 0.0, P);
    };
    auto delivered = [&](double lambda) {
        double e = 0.0;
        for (size_t t = 0; t < c.slots(); ++t) e += eta * x_at(lambda, t) * dt;
        return e;
    };
    double pmin = *std::min_element(c.prices.begin(), c.prices.end());
    double pmax = *std::max_element(c.prices.begin(), c.prices.end());
    double lo = p.cost_weight * pmin / eta, hi = (p.cost_weight * pmax + P / scale) / eta;
    std::vector<double> x(c.slots(), 0.0);
    if (c.energy_needed > 0.0) {
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            (delivered(mid) < c.energy_needed ? lo : hi) = mid;
        }
        double lambda = 0.5 * (lo + hi);
        // Solve the equality exactly on the active set found by bisection.
        double fixed = 0.0, slope = 0.0, offset = 0.0;
        for (size_t t = 0; t < c.slots(); ++t) {
            double v = x_at(lambda, t);
            if (!c.is_available(t) || v <= 0.0) continue;
            if (v >= P) {
                fixed += eta * P * dt;
            } else {
                slope += eta * dt * eta * scale;
                offset += eta * dt * p.cost_weight * c.prices[t] * scale;
            }
        }
        if (slope > 0.0) {
            double exact = (c.energy_needed - fixed + offset) / slope;
            if (std::abs(delivered(exact) - c.energy_needed) <= std::abs(delivered(lambda) - c.energy_needed))
                lambda = exact;
        }
        for (size_t t = 0; t < c.slots(); ++t) x[t] = x_at(lambda, t);
    }
    SolutionPlan plan;
    plan.problem_type = ProblemType::multi_objective_weighted;
    plan.solver_name = "kkt-waterfill";
    plan.feasible = true;
    plan.schedule_kw = std::move(x);
    plan.objective_value = weighted_objective(p, plan.schedule_kw);
    plan.narrative = schedule_narrative(c, plan.schedule_kw) + " for " + fmt("%.2f", energy_cost(c, plan.schedule_kw)) +
                     " while limiting peak power.";
    return plan;
}

bool ValidationReport::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const ConstraintCheck& c) { return c.satisfied; });
}

double ValidationReport::worst_slack() const {
    double w = 0.0;
    for (const auto& c : checks) w = std::min(w, c.slack);
    return w;
}

nlohmann::json ValidationReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks)
        arr.push_back({{"constraint", c.constraint}, {"slack", c.slack}, {"satisfied", c.satisfied}});
    return {{"ok", ok()}, {"checks", arr}};
}

namespace {

void add(ValidationReport& r, std::string name, double slack, double tol) {
    r.checks.push_back({std::move(name), slack, slack >= -tol});
}

void check_schedule(ValidationReport& r, const ChargingCostProblem& c, const std::vector<double>& x) {
    add(r, "schedule length", x.size() == c.slots() ? 0.0 : -1.0, 0.0);
    if (x.size() != c.slots()) return;
    for (size_t t = 0; t < x.size(); ++t) {
        add(r, "x[" + std::to_string(t) + "] >= 0", x[t], kBoxTolerance);
        add(r, "x[" + std::to_string(t) + "] <= a*P_max", (c.is_available(t) ? c.max_power : 0.0) - x[t],
            kBoxTolerance);
    }
}

double charged(const ChargingCostProblem& c, const std::vector<double>& x, size_t upto) {
    double e = 0.0;
    for (size_t t = 0; t < std::min(upto, x.size()); ++t) e += c.efficiency * x[t] * c.slot_hours;
    return e;
}

void check_objective(ValidationReport& r, double claimed, double actual) {
    add(r, "objective value", -std::abs(claimed - actual), 1e-6 * std::max(1.0, std::abs(actual)));
}

}  // namespace

ValidationReport validate_plan(const ProblemInstance& problem, const SolutionPlan& plan) {
    ValidationReport r;
    add(r, "plan type", plan.problem_type == problem_type_of(problem) ? 0.0 : -1.0, 0.0);
    if (!plan.feasible) {
        add(r, "plan feasible", -1.0, 0.0);
        return r;
    }
    if (const auto* c = std::get_if<ChargingCostProblem>(&problem)) {
        check_schedule(r, *c, plan.schedule_kw);
        if (plan.schedule_kw.size() != c->slots()) return r;
        add(r, "energy delivered = energy_needed",
            -std::abs(charged(*c, plan.schedule_kw, c->slots()) - c->energy_needed), kEnergyTolerance);
        check_objective(r, plan.objective_value, energy_cost(*c, plan.schedule_kw));
    } else if (const auto* w = std::get_if<WeightedChargingProblem>(&problem)) {
        const auto& cc = w->charging;
        check_schedule(r, cc, plan.schedule_kw);
        if (plan.schedule_kw.size() != cc.slots()) return r;
        add(r, "energy delivered = energy_needed",
            -std::abs(charged(cc, plan.schedule_kw, cc.slots()) - cc.energy_needed), kEnergyTolerance);
        check_objective(r, plan.objective_value, weighted_objective(*w, plan.schedule_kw));
    } else if (const auto* d = std::get_if<DeadlineProblem>(&problem)) {
        const auto& cc = d->charging;
        check_schedule(r, cc, plan.schedule_kw);
        if (plan.schedule_kw.size() != cc.slots()) return r;
        double need = 0.0;
        for (const auto& m : d->milestones) {
            need = std::max(need, m.required);
            add(r, "milestone:" + m.label, charged(cc, plan.schedule_kw, m.slot) - m.required, kEnergyTolerance);
        }
        double total = charged(cc, plan.schedule_kw, cc.slots());
        add(r, "total charged = final requirement", -std::abs(total - need), kEnergyTolerance);
        add(r, "battery_capacity", d->headroom - total, kEnergyTolerance);
        check_objective(r, plan.objective_value, energy_cost(cc, plan.schedule_kw));
    } else {
        const auto& s = std::get<StationSelectionProblem>(problem);
        size_t idx = s.stations.size();
        for (size_t i = 0; i < s.stations.size(); ++i)
            if (plan.selected_station && s.stations[i].station_id == *plan.selected_station) {
                idx = i;
                break;
            }
        add(r, "s in candidate_stations", idx < s.stations.size() ? 0.0 : -1.0, 0.0);
        if (idx == s.stations.size()) return r;
        double best = station_score(s, 0);
        for (size_t i = 1; i < s.stations.size(); ++i) best = std::min(best, station_score(s, i));
        double chosen = station_score(s, idx);
        add(r, "selection is optimal", best - chosen, 1e-9 * std::max(1.0, std::abs(best)));
        check_objective(r, plan.objective_value, chosen);
    }
    return r;
}

void SolverRegistry::add(SolverDescriptor d) {
    require(static_cast<bool>(d.run), ErrorCode::InvalidArgument, "solver '" + d.name + "' has no entry point");
    solvers_.push_back(std::move(d));
}

const SolverDescriptor& SolverRegistry::select(ProblemType t) const {
    const SolverDescriptor* fallback = nullptr;
    for (const auto& s : solvers_) {
        if (std::find(s.accepts.begin(), s.accepts.end(), t) == s.accepts.end()) continue;
        if (s.exactness == Exactness::exact) return s;
        if (!fallback) fallback = &s;
    }
    if (fallback) return *fallback;
    fail(ErrorCode::NoSolverRegistered, "no solver accepts " + to_string(t));
}

void SolverRegistry::check_complete() const {
    for (auto t : all_problem_types()) {
        bool exact = std::any_of(solvers_.begin(), solvers_.end(), [&](const SolverDescriptor& s) {
            return s.exactness == Exactness::exact &&
                   std::find(s.accepts.begin(), s.accepts.end(), t) != s.accepts.end();
        });
        require(exact, ErrorCode::InvalidArgument, "no exact solver for " + to_string(t));
    }
}

const SolverRegistry& SolverRegistry::defaults() {
    static const SolverRegistry reg = [] {
        SolverRegistry r;
        r.add({"greedy-lp", {ProblemType::cost_min_charging}, Exactness::exact,
               [](const ProblemInstance& p) { return lp_charging_solve(std::get<ChargingCostProblem>(p)); }});
        r.add({"milestone-greedy", {ProblemType::deadline_feasibility}, Exactness::exact,
               [](const ProblemInstance& p) { return deadline_solve(std::get<DeadlineProblem>(p)); }});
        r.add({"station-enumeration", {ProblemType::station_selection}, Exactness::exact,
               [](const ProblemInstance& p) { return station_select(std::get<StationSelectionProblem>(p)); }});
        r.add({"kkt-waterfill", {ProblemType::multi_objective_weighted}, Exactness::exact,
               [](const ProblemInstance& p) { return weighted_charging_solve(std::get<WeightedChargingProblem>(p)); }});
        r.check_complete();
        return r;
    }();
    return reg;
}

SolutionPlan solve(const ProblemInstance& problem, const SolverRegistry& registry) {
    const auto& solver = registry.select(problem_type_of(problem));
    try {
        auto plan = solver.run(problem);
        plan.solver_name = solver.name;
        return plan;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Infeasible) throw;
        SolutionPlan plan;
        plan.problem_type = problem_type_of(problem);
        plan.solver_name = solver.name;
        plan.feasible = false;
        plan.violations.push_back(e.what());
        plan.narrative = std::string("No feasible plan: ") + e.what() + ".";
        return plan;
    }
}

}  // namespace ioev::support
