#pragma once

#include "ioev/nn/param.hpp"

namespace ioev::nn {

// Fully connected layer over column-major batches: x is (in × batch).
class Dense {
public:
    Dense() = default;
    Dense(const std::string& name, int in, int out, Rng& rng);

    Matrix forward(const Matrix& x) const;
    // Accumulates parameter gradients and returns d(loss)/dx.
    Matrix backward(const Matrix& x, const Matrix& dy);
    void collect(ParamSet& set);

    int in_dim() const { return static_cast<int>(weight_.value.cols()); }
    int out_dim() const { return static_cast<int>(weight_.value.rows()); }

private:
    Param weight_;
    Param bias_;
};

Matrix sigmoid(const Matrix& z);
Matrix relu(const Matrix& z);
// Column-wise softmax, numerically stabilised.
Matrix softmax_columns(const Matrix& z);

// Inverted dropout mask: entries are 0 or 1/(1-rate).
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

}  // namespace ioev::nn
