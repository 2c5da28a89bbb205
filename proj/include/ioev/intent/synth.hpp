#pragma once

#include <cstdint>

#include "ioev/intent/intent.hpp"

namespace ioev::intent {

struct QuerySynthOptions {
    size_t n = 300;  // split evenly across the three labels, remainder to the lowest labels
    uint64_t seed = 0;
};

// Queries filled from per-label templates; the label is the template's label.
LabeledQueryCorpus synth_queries(const QuerySynthOptions& opts);

}  // namespace ioev::intent
