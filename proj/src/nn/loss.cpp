#include "ioev/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "ioev/nn/layers.hpp"

namespace ioev::nn {

double binary_cross_entropy(double prob, double target) {
    double p = std::clamp(prob, kProbClip, 1.0 - kProbClip);
    return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

double softmax_cross_entropy(const Matrix& logits, std::span<const int> labels, std::span<const double> weights,
                             Matrix* grad) {
    Matrix probs = softmax_columns(logits);
    double wsum = 0.0;
    double loss = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        double w = weights.empty() ? 1.0 : weights[static_cast<size_t>(c)];
        wsum += w;
        loss -= w * std::log(std::max(probs(labels[static_cast<size_t>(c)], c), 1e-300));
    }
    if (grad) {
        *grad = probs;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            double w = weights.empty() ? 1.0 : weights[static_cast<size_t>(c)];
            (*grad)(labels[static_cast<size_t>(c)], c) -= 1.0;
            grad->col(c) *= w / wsum;
        }
    }
    return loss / wsum;
}

}  // namespace ioev::nn
