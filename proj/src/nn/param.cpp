#include "ioev/nn/param.hpp"

#include "ioev/core/error.hpp"

namespace ioev::nn {

size_t ParamSet::size() const {
    size_t n = 0;
    for (const Param* p : params_) n += static_cast<size_t>(p->value.size());
    return n;
}

std::vector<double> ParamSet::flatten() const {
    std::vector<double> out;
    out.reserve(size());
    for (const Param* p : params_) out.insert(out.end(), p->value.data(), p->value.data() + p->value.size());
    return out;
}

std::vector<double> ParamSet::flatten_grads() const {
    std::vector<double> out;
    out.reserve(size());
    for (const Param* p : params_) out.insert(out.end(), p->grad.data(), p->grad.data() + p->grad.size());
    return out;
}

void ParamSet::assign(std::span<const double> flat) {
    require(flat.size() == size(), ErrorCode::DimensionMismatch,
            "weight vector has " + std::to_string(flat.size()) + " entries, model expects " +
                std::to_string(size()));
    size_t off = 0;
    for (Param* p : params_) {
        std::copy_n(flat.data() + off, p->value.size(), p->value.data());
        off += static_cast<size_t>(p->value.size());
    }
}

void ParamSet::zero_grad() {
    for (Param* p : params_) p->grad.setZero();
}

void init_uniform(Matrix& m, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

}  // namespace ioev::nn
