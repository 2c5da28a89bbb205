#include "ioev/nn/optim.hpp"

#include <cmath>

namespace ioev::nn {

Adam::Adam(const ParamSet& params, Options opts) : params_(params), opts_(opts) {
    for (const Param* p : params_.params()) {
        m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
}

void Adam::step() {
    ++t_;
    double scale = 1.0;
    if (opts_.grad_clip > 0.0) {
        double sq = 0.0;
        for (const Param* p : params_.params()) sq += p->grad.squaredNorm();
        double norm = std::sqrt(sq);
        if (norm > opts_.grad_clip) scale = opts_.grad_clip / norm;
    }
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    auto params = params_.params();
    for (size_t k = 0; k < params.size(); ++k) {
        Param& p = *params[k];
        auto g = (p.grad * scale).array();
        m_[k].array() = opts_.beta1 * m_[k].array() + (1.0 - opts_.beta1) * g;
        v_[k].array() = opts_.beta2 * v_[k].array() + (1.0 - opts_.beta2) * g.square();
        p.value.array() -= opts_.learning_rate * (m_[k].array() / bc1) /
                           ((v_[k].array() / bc2).sqrt() + opts_.epsilon);
    }
}

}  // namespace ioev::nn
