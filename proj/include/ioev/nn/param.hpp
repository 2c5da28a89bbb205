#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ioev::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

// A trainable tensor and its accumulated gradient.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;

    Param() = default;
    Param(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
};

// Ordered, non-owning view over a model's parameters. The order defines the
// layout of flattened weight vectors, so it must be stable for a given config.
class ParamSet {
public:
    void add(Param& p) { params_.push_back(&p); }

    std::span<Param* const> params() const { return params_; }
    size_t size() const;

    std::vector<double> flatten() const;
    std::vector<double> flatten_grads() const;
    void assign(std::span<const double> flat);
    void zero_grad();

private:
    std::vector<Param*> params_;
};

void init_uniform(Matrix& m, double bound, Rng& rng);

}  // namespace ioev::nn
