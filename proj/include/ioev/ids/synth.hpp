#pragma once

#include <array>
#include <cstdint>

#include "ioev/core/csv.hpp"
#include "ioev/ids/flows.hpp"

namespace ioev::ids {

// Three Gaussian clusters (benign, recon, dos) over flow statistics, exported
// with the identifier columns and label strings of a capture tool so the full
// preprocessing path is exercised. src2dst/dst2src packet counts are near-linear
// in the bidirectional count, protocol is constant and application_name is text.
struct FlowSynthOptions {
    size_t n = 3000;
    uint64_t seed = 1;
    std::array<double, kNumClasses> class_mix = {0.6, 0.15, 0.25};
};

CsvTable synth_flows(const FlowSynthOptions& opts);

// Generator mean for the given class, in the requested column order.
FlowRecord cluster_center(AttackClass c, const std::vector<std::string>& names);

}  // namespace ioev::ids
