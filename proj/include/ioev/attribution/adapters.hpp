#pragma once

#include "ioev/attribution/shapley.hpp"
#include "ioev/battery/model.hpp"
#include "ioev/ids/detector.hpp"

namespace ioev::attribution {

// Per-class proportional sample of at most n training rows.
BackgroundSet stratified_background(const ids::FeatureTable& train, size_t n = 100, uint64_t seed = 0);

struct FlowExplanation {
    ids::AttackPrediction prediction;
    Attribution attribution;  // of the predicted class probability
};

// Features are named after the detector schema; throws SchemaMismatch like Detector::infer.
FlowExplanation explain_flow(const ids::Detector& det, const ids::FlowRecord& flow, const BackgroundSet& bg,
                             ShapleyOptions opts = {});

// Background windows flattened step-major.
BackgroundSet battery_background(const battery::BatteryDataset& data, size_t n = 10, uint64_t seed = 0);

// Explains the SoH anomaly probability with one player per telemetry channel
// (all 128 steps of a channel move together).
Attribution explain_battery(const battery::MultiTaskModel& model, const battery::TelemetryWindow& window,
                            const BackgroundSet& bg, ShapleyOptions opts = {});

}  // namespace ioev::attribution
