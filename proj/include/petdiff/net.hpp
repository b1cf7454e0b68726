#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "petdiff/kernels.hpp"
#include "petdiff/rng.hpp"

namespace petdiff {

template <class S>
struct NamedTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<S> v;
    size_t size() const { return v.size(); }
};

template <class S>
struct ParamStore {
    std::vector<NamedTensor<S>> t;

    int add(std::string name, std::vector<int> shape) {
        size_t n = 1;
        for (int d : shape) n *= size_t(d);
        t.push_back({std::move(name), std::move(shape), std::vector<S>(n, S(0))});
        return int(t.size()) - 1;
    }
    size_t total_scalars() const {
        size_t n = 0;
        for (auto& a : t) n += a.size();
        return n;
    }
    void zero() {
        for (auto& a : t)
            for (auto& x : a.v) x = S(0);
    }
    template <class U>
    static ParamStore<S> from(const ParamStore<U>& o) {
        ParamStore<S> r;
        r.t.reserve(o.t.size());
        for (auto& a : o.t) {
            NamedTensor<S> n{a.name, a.shape, std::vector<S>(a.v.begin(), a.v.end())};
            r.t.push_back(std::move(n));
        }
        return r;
    }
};

struct NetConfig {
    int in_channels = 10;
    int out_channels = 2;
    int w0 = 8, w1 = 12, w2 = 16;  // stage widths, full / half / quarter resolution
    int emb_dim = 64;
    bool time_input = true;  // diffusion denoiser conditions on t; the prior does not
    bool log_dose = true;    // encode log10(1 + dose_bq) rather than raw Bq
};

// sin/cos features of a scalar at emb_dim/2 geometric frequencies
void sincos_features(double x, int dim, double* out);

// summed conditioning features for (t, dose); t ignored when time_input off
std::vector<double> cond_features(const NetConfig& cfg, double t, double dose_bq);

namespace detail {

template <class S>
struct BlockBuf {
    std::vector<S> in, t1, t2, t3;
};

template <class S>
struct Workspace {
    std::vector<double> feat;
    std::vector<S> e0, e0s, e;
    std::vector<S> x, h0, b0, d0, b1, d1, m, n1, u1a, b2_, n0, u0a, b3, hf, y;
    BlockBuf<S> blk[5];
    // backward scratch
    std::vector<S> g_full, g_half, g_quart, g_full2, g_half2, d_e, d_e0;
    int h = 0, w = 0;
};

}  // namespace detail

// Conditional 2D encoder-decoder, residual blocks at three resolutions with
// additive skip paths and per-stage embedding injection. Forward/backward are
// explicit; gradients accumulate so callers can sum over a batch.
template <class S>
class UNet2D {
public:
    NetConfig cfg;
    ParamStore<S> params;

    explicit UNet2D(const NetConfig& c);
    void init(uint64_t seed);

    // x: [in_channels][h][w] -> y: [out_channels][h][w]; h, w divisible by 4
    void forward(const S* x, int h, int w, double t, double dose_bq, S* y,
                 detail::Workspace<S>& ws) const;
    // dy: [out_channels][h][w]; uses the workspace of the matching forward
    void backward(const S* dy, detail::Workspace<S>& ws, ParamStore<S>& grads) const;

    size_t num_params() const { return params.total_scalars(); }

    // parameter indices, public so the checkpoint loader can address arrays
    struct Block {
        int c1w, c1b, pw, pb, c2w, c2b;
    };
    int i_in_w, i_in_b;
    int i_fc1w, i_fc1b, i_fc2w, i_fc2b;
    Block enc0, enc1, mid, dec1, dec0;
    int i_dn0w, i_dn0b, i_dn1w, i_dn1b;
    int i_up1w, i_up1b, i_up0w, i_up0b;
    int i_out_w, i_out_b;

private:
    Block add_block(const std::string& name, int c);
    void block_fwd(const Block& b, const S* hin, int c, int hh, int ww, const S* e,
                   detail::BlockBuf<S>& buf, S* hout) const;
    void block_bwd(const Block& b, const S* dout, int c, int hh, int ww, const S* e,
                   const detail::BlockBuf<S>& buf, ParamStore<S>& g, S* dhin, S* d_e) const;
};

using UNet2Df = UNet2D<float>;
using UNet2Dd = UNet2D<double>;

}  // namespace petdiff
