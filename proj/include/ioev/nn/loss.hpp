#pragma once

#include <span>

#include "ioev/nn/param.hpp"

namespace ioev::nn {

// Probabilities are clipped into [eps, 1 - eps] before taking logs.
inline constexpr double kProbClip = 1e-7;

double binary_cross_entropy(double prob, double target);

// Weighted softmax cross-entropy over columns of logits. Returns the weighted
// mean loss and writes d(loss)/d(logits) into grad (same shape as logits).
double softmax_cross_entropy(const Matrix& logits, std::span<const int> labels, std::span<const double> weights,
                             Matrix* grad);

}  // namespace ioev::nn
