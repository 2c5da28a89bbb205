#pragma once

#include "ioev/nn/param.hpp"

namespace ioev::nn {

class Adam {
public:
    struct Options {
        double learning_rate = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
        double grad_clip = 0.0;  // global L2 clip on gradients, 0 disables
    };

    Adam(const ParamSet& params, Options opts);

    void step();

private:
    ParamSet params_;
    Options opts_;
    std::vector<Matrix> m_, v_;
    long t_ = 0;
};

}  // namespace ioev::nn
