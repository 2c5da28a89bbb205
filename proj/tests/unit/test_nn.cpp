#include <doctest.h>

#include <cmath>

#include "ioev/nn/checkpoint.hpp"
#include "ioev/nn/layers.hpp"
#include "ioev/nn/loss.hpp"
#include "ioev/nn/recurrent.hpp"
#include "support.hpp"

using namespace ioev::nn;

namespace {

Sequence random_sequence(int steps, int dim, int batch, Rng& rng) {
    Sequence s;
    for (int t = 0; t < steps; ++t) {
        Matrix m(dim, batch);
        init_uniform(m, 1.0, rng);
        s.push_back(m);
    }
    return s;
}

// Loss = sum(coef ⊙ summary); checks analytic parameter gradients against
// central differences.
double max_rel_error(RecurrentStack& stack, const Sequence& input, const Matrix& coef) {
    ParamSet params;
    stack.collect(params);
    params.zero_grad();
    RecurrentStack::Cache cache;
    Matrix summary = stack.encode(input, &cache, nullptr);
    stack.backward(cache, coef);
    auto analytic = params.flatten_grads();
    auto w = params.flatten();
    double worst = 0.0;
    const double h = 1e-6;
    for (size_t k = 0; k < w.size(); k += 3) {
        auto wp = w;
        wp[k] += h;
        params.assign(wp);
        double lp = coef.cwiseProduct(stack.encode(input, nullptr, nullptr)).sum();
        wp[k] -= 2 * h;
        params.assign(wp);
        double lm = coef.cwiseProduct(stack.encode(input, nullptr, nullptr)).sum();
        double numeric = (lp - lm) / (2 * h);
        double denom = std::max(1e-6, std::abs(numeric) + std::abs(analytic[k]));
        worst = std::max(worst, std::abs(numeric - analytic[k]) / denom);
    }
    params.assign(w);
    return worst;
}

}  // namespace

TEST_CASE("recurrent stacks back-propagate exact gradients") {
    Rng rng(7);
    struct Variant {
        CellKind cell;
        bool bi;
    };
    for (Variant v : {Variant{CellKind::lstm, false}, Variant{CellKind::gru, false}, Variant{CellKind::lstm, true},
                      Variant{CellKind::gru, true}}) {
        RecurrentStack::Options opts;
        opts.cell = v.cell;
        opts.bidirectional = v.bi;
        opts.num_layers = 2;
        opts.hidden = 4;
        RecurrentStack stack("enc", 3, opts, rng);
        auto input = random_sequence(5, 3, 2, rng);
        Matrix coef(stack.summary_dim(), 2);
        init_uniform(coef, 1.0, rng);
        CHECK(max_rel_error(stack, input, coef) < 1e-5);
    }
}

TEST_CASE("dense layer gradient matches finite differences") {
    Rng rng(3);
    Dense layer("d", 4, 3, rng);
    ParamSet params;
    layer.collect(params);
    Matrix x(4, 2);
    init_uniform(x, 1.0, rng);
    Matrix coef(3, 2);
    init_uniform(coef, 1.0, rng);
    params.zero_grad();
    Matrix dx = layer.backward(x, coef);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Matrix xp = x, xm = x;
        xp.data()[i] += h;
        xm.data()[i] -= h;
        double numeric = (coef.cwiseProduct(layer.forward(xp)).sum() - coef.cwiseProduct(layer.forward(xm)).sum()) / (2 * h);
        CHECK(numeric == doctest::Approx(dx.data()[i]).epsilon(1e-6));
    }
}

TEST_CASE("softmax cross-entropy gradient") {
    Matrix logits(3, 2);
    logits << 0.2, -1.0, 1.5, 0.3, -0.7, 2.0;
    std::vector<int> labels{1, 2};
    std::vector<double> weights{1.0, 3.0};
    Matrix grad;
    softmax_cross_entropy(logits, labels, weights, &grad);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        Matrix lp = logits, lm = logits;
        lp.data()[i] += h;
        lm.data()[i] -= h;
        double numeric = (softmax_cross_entropy(lp, labels, weights, nullptr) -
                          softmax_cross_entropy(lm, labels, weights, nullptr)) / (2 * h);
        CHECK(numeric == doctest::Approx(grad.data()[i]).epsilon(1e-6));
    }
}

TEST_CASE("binary cross-entropy clips saturated probabilities") {
    CHECK(std::isfinite(binary_cross_entropy(1.0, 0.0)));
    CHECK(binary_cross_entropy(1.0, 1.0) == doctest::Approx(1e-7).epsilon(1e-3));
}

TEST_CASE("checkpoint round trip preserves tensors and config") {
    Rng rng(11);
    Dense layer("head", 5, 2, rng);
    ParamSet params;
    layer.collect(params);
    auto bytes = encode_checkpoint("dense", {{"in", 5}}, params);
    auto before = params.flatten();
    params.assign(std::vector<double>(before.size(), 0.0));
    auto ck = decode_checkpoint(bytes);
    CHECK(ck.kind == "dense");
    CHECK(ck.config["in"] == 5);
    restore_params(ck, params);
    CHECK(params.flatten() == before);
    CHECK_ERROR_CODE(decode_checkpoint("garbage"), ioev::ErrorCode::ParseError);
}
