#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ioev/core/error.hpp"
#include "ioev/forecast/forecaster.hpp"
#include "ioev/intent/intent.hpp"
#include "ioev/support/aos.hpp"
#include "ioev/support/solvers.hpp"

namespace ioev::support {

// Physical constants stored per session.
struct VehicleProfile {
    double battery_capacity_kwh = 0.0;
    double max_charge_rate_kw = 0.0;
    double efficiency = 0.9;
    std::optional<double> current_soc;      // fraction
    std::optional<double> target_soc;       // fraction
    std::optional<double> trip_energy_kwh;  // energy per planned trip

    void validate() const;
    nlohmann::json to_json() const;
    static VehicleProfile from_json(const nlohmann::json& j);
};

// A session-scoped calendar entry, clock time only.
struct CalendarEvent {
    std::string title;
    int hour = 0;
    int minute = 0;
};

// Values for the next `slots` slots of the planning horizon.
using SeriesProvider = std::function<std::vector<double>(int slots)>;

// Recursive forecast from the most recent observed window.
SeriesProvider forecaster_provider(std::shared_ptr<const forecast::Forecaster> model, forecast::SeriesWindow history);

struct StationCandidate {
    StationOption option;  // occupancy is replaced when a forecaster is attached
    SeriesProvider occupancy;
};

struct SessionContext {
    std::optional<VehicleProfile> vehicle;
    std::vector<CalendarEvent> calendar;
    SeriesProvider prices;
    std::vector<StationCandidate> stations;
    int horizon_start_hour = 18;  // clock hour of slot 0
    int horizon_slots = 24;
    double slot_hours = 1.0;

    // Drops calendar-derived data once it has been used.
    void discard_private();
};

// Documented fallbacks used when no other provenance applies.
inline constexpr double kDefaultEfficiency = 0.9;
inline constexpr double kDefaultCurrentSoc = 0.2;
inline constexpr double kDefaultTargetSoc = 0.8;
inline constexpr double kDefaultTripEnergyKwh = 8.0;
inline constexpr double kDefaultWeight = 0.5;

// Slot index at which clock time hh:mm falls, wrapping past midnight.
size_t clock_slot(const SessionContext& ctx, int hour, int minute);

struct GroundedProblem {
    AbstractOptimizationSkeleton aos;  // every slot resolved
    ProblemInstance instance;
};

// Throws UnresolvableSlot when a slot has no usable source.
GroundedProblem ground_parameters(const AbstractOptimizationSkeleton& aos, const SessionContext& ctx);

// Numeric instance from a fully resolved skeleton.
ProblemInstance instantiate(const AbstractOptimizationSkeleton& aos, const SessionContext& ctx);

enum class Stage { psa, ca, sa };
std::string to_string(Stage s);

class PipelineError : public Error {
public:
    PipelineError(Stage stage, const Error& cause);
    Stage stage() const noexcept { return stage_; }

private:
    Stage stage_;
};

struct PipelineResult {
    std::optional<SolutionPlan> plan;  // absent when clarification is needed
    std::optional<ValidationReport> validation;
    std::string narrative;
    bool clarification = false;
    nlohmann::json trace;  // skeleton, provenances, solver

    nlohmann::json to_json() const;
};

struct PipelineOptions {
    PsaBackend psa;
    const SolverRegistry* registry = nullptr;  // defaults when null
};

// Extract, ground, solve. NoCatalogMatch becomes a clarification; other stage
// failures throw PipelineError naming the stage.
PipelineResult pipeline_run(const intent::QueryText& q, const SessionContext& ctx, const PipelineOptions& opts = {});

}  // namespace ioev::support
