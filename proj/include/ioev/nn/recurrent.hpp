#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ioev/nn/param.hpp"

namespace ioev::nn {

// A batch of sequences: one (features × batch) matrix per time step.
using Sequence = std::vector<Matrix>;

enum class CellKind { lstm, gru };

struct LayerCache {
    virtual ~LayerCache() = default;
};

class RecurrentLayer {
public:
    virtual ~RecurrentLayer() = default;

    virtual int output_dim() const = 0;
    // When cache is non-null the activations needed by backward() are stored in it.
    virtual Sequence forward(const Sequence& input, std::unique_ptr<LayerCache>* cache) const = 0;
    // Accumulates gradients and returns d(loss)/d(input) for every step.
    virtual Sequence backward(const LayerCache& cache, const Sequence& d_output) = 0;
    virtual void collect(ParamSet& set) = 0;
};

std::unique_ptr<RecurrentLayer> make_cell_layer(CellKind kind, const std::string& name, int in, int hidden,
                                                Rng& rng);
std::unique_ptr<RecurrentLayer> make_bidirectional(CellKind kind, const std::string& name, int in, int hidden,
                                                   Rng& rng);

// Stack of recurrent layers with inverted dropout between consecutive layers.
class RecurrentStack {
public:
    struct Options {
        CellKind cell = CellKind::lstm;
        bool bidirectional = false;
        int num_layers = 2;
        int hidden = 64;
        double dropout = 0.0;
    };

    struct Cache {
        std::vector<std::unique_ptr<LayerCache>> layers;
        std::vector<Matrix> masks;  // one per inter-layer boundary, applied to every step
        Eigen::Index steps = 0;
        Eigen::Index batch = 0;
    };

    RecurrentStack() = default;
    RecurrentStack(const std::string& name, int input_dim, const Options& opts, Rng& rng);

    // Summary vector per sequence: the final hidden state (for bidirectional
    // stacks, forward-final concatenated with backward-final). Shape (summary_dim × batch).
    Matrix encode(const Sequence& input, Cache* cache, Rng* dropout_rng) const;
    // Back-propagates d(loss)/d(summary); returns d(loss)/d(input).
    Sequence backward(const Cache& cache, const Matrix& d_summary);
    void collect(ParamSet& set);

    int summary_dim() const { return opts_.bidirectional ? 2 * opts_.hidden : opts_.hidden; }
    const Options& options() const { return opts_; }

private:
    Options opts_;
    std::vector<std::unique_ptr<RecurrentLayer>> layers_;
};

}  // namespace ioev::nn
