#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ioev/support/aos.hpp"

namespace ioev::support {

inline constexpr const char* kPlanSchemaVersion = "ioev.plan/1";
inline constexpr double kEnergyTolerance = 1e-4;  // kWh, equality and milestone checks
inline constexpr double kBoxTolerance = 1e-9;     // kW, power bounds
inline constexpr size_t kMaxStations = 20;

// x_t in kW per slot; the battery receives efficiency * x_t * slot_hours kWh.
struct ChargingCostProblem {
    std::vector<double> prices;  // currency/kWh drawn from the grid
    double slot_hours = 1.0;
    double energy_needed = 0.0;  // kWh into the battery
    double max_power = 0.0;      // kW
    std::vector<bool> available;  // empty means every slot
    double efficiency = 0.9;
    int start_hour = 0;  // clock hour of slot 0, for the narrative only

    size_t slots() const { return prices.size(); }
    bool is_available(size_t t) const { return available.empty() || available[t]; }
    // Largest deliverable energy: sum_t a_t * max_power * efficiency * slot_hours.
    double capacity() const;
    // Throws InvalidArgument on malformed data (not on infeasibility).
    void validate() const;
    nlohmann::json to_json() const;
};

// Charged energy required strictly before slot index `slot`.
struct Milestone {
    std::string label;
    size_t slot = 0;
    double required = 0.0;
};

// Minimum cost subject to cumulative milestones; the total charged equals the
// largest requirement and may not exceed headroom.
struct DeadlineProblem {
    ChargingCostProblem charging;  // energy_needed is ignored
    std::vector<Milestone> milestones;
    double headroom = 0.0;  // battery capacity minus initial energy, kWh

    void validate() const;
    nlohmann::json to_json() const;
};

struct StationOption {
    std::string station_id;
    double distance_km = 0.0;
    double price_per_kwh = 0.0;
    double max_power_kw = 0.0;
    double occupancy = 0.0;  // expected fraction of busy connectors

    nlohmann::json to_json() const;
    static StationOption from_json(const nlohmann::json& j);
};

struct StationSelectionProblem {
    std::vector<StationOption> stations;
    std::string criterion = "cost";  // cost | time | distance
    double energy_needed = 0.0;
    double max_charge_rate = 0.0;
    double efficiency = 0.9;
    double detour_cost_per_km = 0.25;
    double avg_speed_kmh = 40.0;
    double full_wait_hours = 0.75;  // expected wait at occupancy 1

    void validate() const;
    nlohmann::json to_json() const;
};

// cost_weight * energy cost + wear_weight * sum_t x_t^2 * slot_hours / max_power
struct WeightedChargingProblem {
    ChargingCostProblem charging;
    double cost_weight = 0.5;
    double wear_weight = 0.5;

    void validate() const;
    nlohmann::json to_json() const;
};

using ProblemInstance =
    std::variant<ChargingCostProblem, DeadlineProblem, StationSelectionProblem, WeightedChargingProblem>;

ProblemType problem_type_of(const ProblemInstance& p);
nlohmann::json problem_to_json(const ProblemInstance& p);

struct SolutionPlan {
    ProblemType problem_type = ProblemType::cost_min_charging;
    std::vector<double> schedule_kw;
    double objective_value = 0.0;
    bool feasible = false;
    std::string solver_name;
    std::string narrative;
    std::optional<std::string> selected_station;
    std::vector<std::string> violations;  // violated constraints when infeasible

    nlohmann::json to_json() const;
    static SolutionPlan from_json(const nlohmann::json& j);
};

double energy_cost(const ChargingCostProblem& p, const std::vector<double>& x);
double weighted_objective(const WeightedChargingProblem& p, const std::vector<double>& x);
double station_score(const StationSelectionProblem& p, size_t i);

// Exact: fills the cheapest available slots first, earlier slot on equal price.
// Throws Infeasible when the energy cannot be delivered.
SolutionPlan lp_charging_solve(const ChargingCostProblem& p);
// Exact greedy over milestones in time order; infeasible plans name the milestone.
SolutionPlan deadline_solve(const DeadlineProblem& p);
// Exhaustive enumeration; ties go to the earlier station.
SolutionPlan station_select(const StationSelectionProblem& p);
// Exact KKT water-filling for the separable convex objective.
SolutionPlan weighted_charging_solve(const WeightedChargingProblem& p);

struct ConstraintCheck {
    std::string constraint;
    double slack = 0.0;  // negative means violated by that amount
    bool satisfied = true;
};

struct ValidationReport {
    std::vector<ConstraintCheck> checks;

    bool ok() const;
    double worst_slack() const;
    nlohmann::json to_json() const;
};

// Re-checks every constraint numerically, independent of solver internals.
ValidationReport validate_plan(const ProblemInstance& problem, const SolutionPlan& plan);

enum class Exactness { exact, heuristic };

struct SolverDescriptor {
    std::string name;
    std::vector<ProblemType> accepts;
    Exactness exactness = Exactness::exact;
    std::function<SolutionPlan(const ProblemInstance&)> run;
};

class SolverRegistry {
public:
    void add(SolverDescriptor d);
    // First exact solver for the type, else the first heuristic; NoSolverRegistered otherwise.
    const SolverDescriptor& select(ProblemType t) const;
    // InvalidArgument unless every problem type has an exact solver.
    void check_complete() const;
    const std::vector<SolverDescriptor>& solvers() const { return solvers_; }

    static const SolverRegistry& defaults();

private:
    std::vector<SolverDescriptor> solvers_;
};

// Dispatches by problem type. Infeasible instances come back with feasible=false
// and a violation report instead of throwing.
SolutionPlan solve(const ProblemInstance& problem, const SolverRegistry& registry = SolverRegistry::defaults());

}  // namespace ioev::support
