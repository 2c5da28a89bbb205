#include "ioev/nn/recurrent.hpp"

#include <cmath>

#include "ioev/core/error.hpp"
#include "ioev/nn/layers.hpp"

namespace ioev::nn {

namespace {

Matrix tanh_m(const Matrix& z) { return z.array().tanh().matrix(); }

// Standard LSTM with gate order (input, forget, cell, output).
class LstmLayer final : public RecurrentLayer {
public:
    LstmLayer(const std::string& name, int in, int hidden, Rng& rng)
        : hidden_(hidden),
          w_(name + ".w_ih", 4 * hidden, in),
          u_(name + ".w_hh", 4 * hidden, hidden),
          b_(name + ".bias", 4 * hidden, 1) {
        double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
        init_uniform(w_.value, bound, rng);
        init_uniform(u_.value, bound, rng);
        init_uniform(b_.value, bound, rng);
    }

    int output_dim() const override { return hidden_; }

    struct StepCache : LayerCache {
        Sequence x, i, f, g, o, c, tanh_c, h_prev, c_prev;
    };

    Sequence forward(const Sequence& input, std::unique_ptr<LayerCache>* cache) const override {
        const Eigen::Index H = hidden_;
        const Eigen::Index B = input.empty() ? 0 : input.front().cols();
        Matrix h = Matrix::Zero(H, B);
        Matrix c = Matrix::Zero(H, B);
        Sequence out;
        out.reserve(input.size());
        auto sc = cache ? std::make_unique<StepCache>() : nullptr;
        for (const Matrix& x : input) {
            Matrix z = w_.value * x;
            z.noalias() += u_.value * h;
            z.colwise() += b_.value.col(0);
            Matrix i = sigmoid(z.topRows(H));
            Matrix f = sigmoid(z.middleRows(H, H));
            Matrix g = tanh_m(z.middleRows(2 * H, H));
            Matrix o = sigmoid(z.bottomRows(H));
            Matrix c_new = f.cwiseProduct(c) + i.cwiseProduct(g);
            Matrix tc = tanh_m(c_new);
            Matrix h_new = o.cwiseProduct(tc);
            if (sc) {
                sc->x.push_back(x);
                sc->i.push_back(std::move(i));
                sc->f.push_back(std::move(f));
                sc->g.push_back(std::move(g));
                sc->o.push_back(std::move(o));
                sc->c.push_back(c_new);
                sc->tanh_c.push_back(std::move(tc));
                sc->h_prev.push_back(h);
                sc->c_prev.push_back(c);
            }
            h = std::move(h_new);
            c = std::move(c_new);
            out.push_back(h);
        }
        if (cache) *cache = std::move(sc);
        return out;
    }

    Sequence backward(const LayerCache& base, const Sequence& d_output) override {
        const auto& sc = static_cast<const StepCache&>(base);
        const Eigen::Index H = hidden_;
        const size_t T = sc.x.size();
        const Eigen::Index B = T ? sc.x.front().cols() : 0;
        Sequence dx(T);
        Matrix dh_next = Matrix::Zero(H, B);
        Matrix dc_next = Matrix::Zero(H, B);
        Matrix dz(4 * H, B);
        for (size_t s = T; s-- > 0;) {
            Matrix dh = d_output[s] + dh_next;
            const Matrix& o = sc.o[s];
            const Matrix& tc = sc.tanh_c[s];
            Matrix dc = dc_next + dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
            Matrix d_o = dh.cwiseProduct(tc);
            Matrix d_i = dc.cwiseProduct(sc.g[s]);
            Matrix d_g = dc.cwiseProduct(sc.i[s]);
            Matrix d_f = dc.cwiseProduct(sc.c_prev[s]);
            dc_next = dc.cwiseProduct(sc.f[s]);
            dz.topRows(H) = d_i.array() * sc.i[s].array() * (1.0 - sc.i[s].array());
            dz.middleRows(H, H) = d_f.array() * sc.f[s].array() * (1.0 - sc.f[s].array());
            dz.middleRows(2 * H, H) = d_g.array() * (1.0 - sc.g[s].array().square());
            dz.bottomRows(H) = d_o.array() * o.array() * (1.0 - o.array());
            w_.grad.noalias() += dz * sc.x[s].transpose();
            u_.grad.noalias() += dz * sc.h_prev[s].transpose();
            b_.grad.col(0) += dz.rowwise().sum();
            dx[s] = w_.value.transpose() * dz;
            dh_next = u_.value.transpose() * dz;
        }
        return dx;
    }

    void collect(ParamSet& set) override {
        set.add(w_);
        set.add(u_);
        set.add(b_);
    }

private:
    int hidden_;
    Param w_, u_, b_;
};

// GRU with gate order (reset, update, new) and separate input/hidden biases,
// n = tanh(W_n x + b_in + r * (U_n h + b_hn)), h' = (1 - z) * n + z * h.
class GruLayer final : public RecurrentLayer {
public:
    GruLayer(const std::string& name, int in, int hidden, Rng& rng)
        : hidden_(hidden),
          w_(name + ".w_ih", 3 * hidden, in),
          u_(name + ".w_hh", 3 * hidden, hidden),
          bi_(name + ".b_ih", 3 * hidden, 1),
          bh_(name + ".b_hh", 3 * hidden, 1) {
        double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
        init_uniform(w_.value, bound, rng);
        init_uniform(u_.value, bound, rng);
        init_uniform(bi_.value, bound, rng);
        init_uniform(bh_.value, bound, rng);
    }

    int output_dim() const override { return hidden_; }

    struct StepCache : LayerCache {
        Sequence x, r, z, n, hn, h_prev;
    };

    Sequence forward(const Sequence& input, std::unique_ptr<LayerCache>* cache) const override {
        const Eigen::Index H = hidden_;
        const Eigen::Index B = input.empty() ? 0 : input.front().cols();
        Matrix h = Matrix::Zero(H, B);
        Sequence out;
        out.reserve(input.size());
        auto sc = cache ? std::make_unique<StepCache>() : nullptr;
        for (const Matrix& x : input) {
            Matrix gx = w_.value * x;
            gx.colwise() += bi_.value.col(0);
            Matrix gh = u_.value * h;
            gh.colwise() += bh_.value.col(0);
            Matrix r = sigmoid(gx.topRows(H) + gh.topRows(H));
            Matrix z = sigmoid(gx.middleRows(H, H) + gh.middleRows(H, H));
            Matrix hn = gh.bottomRows(H);
            Matrix n = tanh_m(gx.bottomRows(H) + r.cwiseProduct(hn));
            Matrix h_new = (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(h);
            if (sc) {
                sc->x.push_back(x);
                sc->r.push_back(std::move(r));
                sc->z.push_back(std::move(z));
                sc->n.push_back(std::move(n));
                sc->hn.push_back(std::move(hn));
                sc->h_prev.push_back(h);
            }
            h = std::move(h_new);
            out.push_back(h);
        }
        if (cache) *cache = std::move(sc);
        return out;
    }

    Sequence backward(const LayerCache& base, const Sequence& d_output) override {
        const auto& sc = static_cast<const StepCache&>(base);
        const Eigen::Index H = hidden_;
        const size_t T = sc.x.size();
        const Eigen::Index B = T ? sc.x.front().cols() : 0;
        Sequence dx(T);
        Matrix dh_next = Matrix::Zero(H, B);
        Matrix dgx(3 * H, B);
        Matrix dgh(3 * H, B);
        for (size_t s = T; s-- > 0;) {
            Matrix dh = d_output[s] + dh_next;
            const Matrix& r = sc.r[s];
            const Matrix& z = sc.z[s];
            const Matrix& n = sc.n[s];
            Matrix dn = dh.cwiseProduct((1.0 - z.array()).matrix());
            Matrix dz = dh.cwiseProduct(sc.h_prev[s] - n);
            Matrix dn_pre = dn.array() * (1.0 - n.array().square());
            Matrix dr = dn_pre.cwiseProduct(sc.hn[s]);
            Matrix dr_pre = dr.array() * r.array() * (1.0 - r.array());
            Matrix dz_pre = dz.array() * z.array() * (1.0 - z.array());
            dgx.topRows(H) = dr_pre;
            dgx.middleRows(H, H) = dz_pre;
            dgx.bottomRows(H) = dn_pre;
            dgh.topRows(H) = dr_pre;
            dgh.middleRows(H, H) = dz_pre;
            dgh.bottomRows(H) = dn_pre.cwiseProduct(r);
            w_.grad.noalias() += dgx * sc.x[s].transpose();
            bi_.grad.col(0) += dgx.rowwise().sum();
            u_.grad.noalias() += dgh * sc.h_prev[s].transpose();
            bh_.grad.col(0) += dgh.rowwise().sum();
            dx[s] = w_.value.transpose() * dgx;
            dh_next = u_.value.transpose() * dgh + dh.cwiseProduct(z);
        }
        return dx;
    }

    void collect(ParamSet& set) override {
        set.add(w_);
        set.add(u_);
        set.add(bi_);
        set.add(bh_);
    }

private:
    int hidden_;
    Param w_, u_, bi_, bh_;
};

// Output at step t is [forward_t ; backward_t], where backward_t has consumed
// steps T-1 .. t of the input.
class BidirectionalLayer final : public RecurrentLayer {
public:
    BidirectionalLayer(CellKind kind, const std::string& name, int in, int hidden, Rng& rng)
        : fwd_(make_cell_layer(kind, name + ".fwd", in, hidden, rng)),
          bwd_(make_cell_layer(kind, name + ".bwd", in, hidden, rng)),
          hidden_(hidden) {}

    int output_dim() const override { return 2 * hidden_; }

    struct PairCache : LayerCache {
        std::unique_ptr<LayerCache> fwd, bwd;
    };

    Sequence forward(const Sequence& input, std::unique_ptr<LayerCache>* cache) const override {
        Sequence reversed(input.rbegin(), input.rend());
        std::unique_ptr<LayerCache> cf, cb;
        Sequence of = fwd_->forward(input, cache ? &cf : nullptr);
        Sequence ob = bwd_->forward(reversed, cache ? &cb : nullptr);
        const size_t T = input.size();
        Sequence out(T);
        for (size_t t = 0; t < T; ++t) {
            out[t].resize(2 * hidden_, of[t].cols());
            out[t].topRows(hidden_) = of[t];
            out[t].bottomRows(hidden_) = ob[T - 1 - t];
        }
        if (cache) {
            auto pc = std::make_unique<PairCache>();
            pc->fwd = std::move(cf);
            pc->bwd = std::move(cb);
            *cache = std::move(pc);
        }
        return out;
    }

    Sequence backward(const LayerCache& base, const Sequence& d_output) override {
        const auto& pc = static_cast<const PairCache&>(base);
        const size_t T = d_output.size();
        Sequence df(T), db(T);
        for (size_t t = 0; t < T; ++t) {
            df[t] = d_output[t].topRows(hidden_);
            db[T - 1 - t] = d_output[t].bottomRows(hidden_);
        }
        Sequence dxf = fwd_->backward(*pc.fwd, df);
        Sequence dxb = bwd_->backward(*pc.bwd, db);
        for (size_t t = 0; t < T; ++t) dxf[t] += dxb[T - 1 - t];
        return dxf;
    }

    void collect(ParamSet& set) override {
        fwd_->collect(set);
        bwd_->collect(set);
    }

private:
    std::unique_ptr<RecurrentLayer> fwd_, bwd_;
    int hidden_;
};

}  // namespace

std::unique_ptr<RecurrentLayer> make_cell_layer(CellKind kind, const std::string& name, int in, int hidden,
                                                Rng& rng) {
    if (kind == CellKind::gru) return std::make_unique<GruLayer>(name, in, hidden, rng);
    return std::make_unique<LstmLayer>(name, in, hidden, rng);
}

std::unique_ptr<RecurrentLayer> make_bidirectional(CellKind kind, const std::string& name, int in, int hidden,
                                                   Rng& rng) {
    return std::make_unique<BidirectionalLayer>(kind, name, in, hidden, rng);
}

RecurrentStack::RecurrentStack(const std::string& name, int input_dim, const Options& opts, Rng& rng)
    : opts_(opts) {
    require(opts.num_layers >= 1 && opts.hidden >= 1, ErrorCode::InvalidArgument,
            "recurrent stack needs at least one layer and one hidden unit");
    int in = input_dim;
    for (int l = 0; l < opts.num_layers; ++l) {
        std::string lname = name + ".l" + std::to_string(l);
        if (opts.bidirectional) {
            layers_.push_back(make_bidirectional(opts.cell, lname, in, opts.hidden, rng));
        } else {
            layers_.push_back(make_cell_layer(opts.cell, lname, in, opts.hidden, rng));
        }
        in = layers_.back()->output_dim();
    }
}

Matrix RecurrentStack::encode(const Sequence& input, Cache* cache, Rng* dropout_rng) const {
    require(!input.empty(), ErrorCode::ShapeMismatch, "empty input sequence");
    const Eigen::Index B = input.front().cols();
    Sequence current = input;
    if (cache) {
        cache->layers.clear();
        cache->masks.clear();
        cache->steps = static_cast<Eigen::Index>(input.size());
        cache->batch = B;
    }
    for (size_t l = 0; l < layers_.size(); ++l) {
        std::unique_ptr<LayerCache> lc;
        current = layers_[l]->forward(current, cache ? &lc : nullptr);
        if (cache) cache->layers.push_back(std::move(lc));
        bool last = l + 1 == layers_.size();
        if (!last && dropout_rng && opts_.dropout > 0.0) {
            Matrix mask = dropout_mask(current.front().rows(), B, opts_.dropout, *dropout_rng);
            for (auto& m : current) m = m.cwiseProduct(mask);
            if (cache) cache->masks.push_back(std::move(mask));
        } else if (!last && cache) {
            cache->masks.emplace_back();
        }
    }
    const Eigen::Index H = opts_.hidden;
    if (!opts_.bidirectional) return current.back();
    Matrix summary(2 * H, B);
    summary.topRows(H) = current.back().topRows(H);
    summary.bottomRows(H) = current.front().bottomRows(H);
    return summary;
}

Sequence RecurrentStack::backward(const Cache& cache, const Matrix& d_summary) {
    const Eigen::Index H = opts_.hidden;
    const size_t T = static_cast<size_t>(cache.steps);
    const int top_dim = layers_.back()->output_dim();
    Sequence d(T, Matrix::Zero(top_dim, cache.batch));
    if (!opts_.bidirectional) {
        d[T - 1] = d_summary;
    } else {
        d[T - 1].topRows(H) = d_summary.topRows(H);
        d[0].bottomRows(H) += d_summary.bottomRows(H);
    }
    for (size_t l = layers_.size(); l-- > 0;) {
        if (l + 1 < layers_.size() && cache.masks[l].size() > 0) {
            for (auto& m : d) m = m.cwiseProduct(cache.masks[l]);
        }
        d = layers_[l]->backward(*cache.layers[l], d);
    }
    return d;
}

void RecurrentStack::collect(ParamSet& set) {
    for (auto& layer : layers_) layer->collect(set);
}

}  // namespace ioev::nn
