#include "ioev/nn/layers.hpp"

#include <cmath>

namespace ioev::nn {

Dense::Dense(const std::string& name, int in, int out, Rng& rng)
    : weight_(name + ".weight", out, in), bias_(name + ".bias", out, 1) {
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    init_uniform(weight_.value, bound, rng);
    init_uniform(bias_.value, bound, rng);
}

Matrix Dense::forward(const Matrix& x) const {
    Matrix y = weight_.value * x;
    y.colwise() += bias_.value.col(0);
    return y;
}

Matrix Dense::backward(const Matrix& x, const Matrix& dy) {
    weight_.grad.noalias() += dy * x.transpose();
    bias_.grad.col(0) += dy.rowwise().sum();
    return weight_.value.transpose() * dy;
}

void Dense::collect(ParamSet& set) {
    set.add(weight_);
    set.add(bias_);
}

Matrix sigmoid(const Matrix& z) {
    return z.unaryExpr([](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
    });
}

Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

Matrix softmax_columns(const Matrix& z) {
    Matrix out(z.rows(), z.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        double mx = z.col(c).maxCoeff();
        Vector e = (z.col(c).array() - mx).exp().matrix();
        out.col(c) = e / e.sum();
    }
    return out;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Matrix mask(rows, cols);
    std::bernoulli_distribution keep(1.0 - rate);
    double scale = rate < 1.0 ? 1.0 / (1.0 - rate) : 0.0;
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : 0.0;
    return mask;
}

}  // namespace ioev::nn
