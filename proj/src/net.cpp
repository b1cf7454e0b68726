#include "petdiff/net.hpp"

#include <algorithm>

namespace petdiff {

void sincos_features(double x, int dim, double* out) {
    if (dim < 2 || dim % 2) throw std::invalid_argument("sincos_features: dim must be even >= 2");
    int half = dim / 2;
    double lmax = std::log(10000.0);
    for (int i = 0; i < half; ++i) {
        double f = std::exp(-lmax * double(i) / double(half));
        out[2 * i] = std::sin(x * f);
        out[2 * i + 1] = std::cos(x * f);
    }
}

std::vector<double> cond_features(const NetConfig& cfg, double t, double dose_bq) {
    if (dose_bq < 0.0) throw std::invalid_argument("cond_features: negative dose");
    std::vector<double> f(cfg.emb_dim, 0.0), tmp(cfg.emb_dim);
    double g = cfg.log_dose ? std::log10(1.0 + dose_bq) : dose_bq;
    sincos_features(g, cfg.emb_dim, f.data());
    if (cfg.time_input) {
        sincos_features(t, cfg.emb_dim, tmp.data());
        for (int i = 0; i < cfg.emb_dim; ++i) f[i] += tmp[i];
    }
    return f;
}

namespace {

template <class S>
void linear_fwd(const S* W, const S* b, const S* x, int out, int in, S* y) {
    for (int o = 0; o < out; ++o) {
        S acc = b[o];
        const S* row = W + size_t(o) * in;
        for (int i = 0; i < in; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

template <class S>
void linear_bwd(const S* W, const S* x, const S* dy, int out, int in, S* dW, S* db, S* dx) {
    for (int o = 0; o < out; ++o) {
        db[o] += dy[o];
        const S* row = W + size_t(o) * in;
        S* grow = dW + size_t(o) * in;
        for (int i = 0; i < in; ++i) grow[i] += dy[o] * x[i];
        if (dx)
            for (int i = 0; i < in; ++i) dx[i] += row[i] * dy[o];
    }
}

template <class S>
void resize(std::vector<S>& v, size_t n) {
    if (v.size() != n) v.assign(n, S(0));
}

}  // namespace

template <class S>
typename UNet2D<S>::Block UNet2D<S>::add_block(const std::string& name, int c) {
    Block b;
    b.c1w = params.add(name + ".conv1.w", {c, c, 3, 3});
    b.c1b = params.add(name + ".conv1.b", {c});
    b.pw = params.add(name + ".emb.w", {c, cfg.emb_dim});
    b.pb = params.add(name + ".emb.b", {c});
    b.c2w = params.add(name + ".conv2.w", {c, c, 3, 3});
    b.c2b = params.add(name + ".conv2.b", {c});
    return b;
}

template <class S>
UNet2D<S>::UNet2D(const NetConfig& c) : cfg(c) {
    if (c.in_channels < 1 || c.out_channels < 1) throw std::invalid_argument("UNet2D: channels");
    if (c.emb_dim < 2 || c.emb_dim % 2) throw std::invalid_argument("UNet2D: emb_dim must be even");
    if (c.w0 < 1 || c.w1 < 1 || c.w2 < 1) throw std::invalid_argument("UNet2D: widths");
    i_in_w = params.add("in.w", {c.w0, c.in_channels, 3, 3});
    i_in_b = params.add("in.b", {c.w0});
    i_fc1w = params.add("emb.fc1.w", {c.emb_dim, c.emb_dim});
    i_fc1b = params.add("emb.fc1.b", {c.emb_dim});
    i_fc2w = params.add("emb.fc2.w", {c.emb_dim, c.emb_dim});
    i_fc2b = params.add("emb.fc2.b", {c.emb_dim});
    enc0 = add_block("enc0", c.w0);
    i_dn0w = params.add("down0.w", {c.w1, c.w0, 3, 3});
    i_dn0b = params.add("down0.b", {c.w1});
    enc1 = add_block("enc1", c.w1);
    i_dn1w = params.add("down1.w", {c.w2, c.w1, 3, 3});
    i_dn1b = params.add("down1.b", {c.w2});
    mid = add_block("mid", c.w2);
    i_up1w = params.add("up1.w", {c.w1, c.w2, 3, 3});
    i_up1b = params.add("up1.b", {c.w1});
    dec1 = add_block("dec1", c.w1);
    i_up0w = params.add("up0.w", {c.w0, c.w1, 3, 3});
    i_up0b = params.add("up0.b", {c.w0});
    dec0 = add_block("dec0", c.w0);
    i_out_w = params.add("out.w", {c.out_channels, c.w0, 3, 3});
    i_out_b = params.add("out.b", {c.out_channels});
}

template <class S>
void UNet2D<S>::init(uint64_t seed) {
    for (size_t a = 0; a < params.t.size(); ++a) {
        auto& arr = params.t[a];
        if (arr.shape.size() == 1) {  // bias
            std::fill(arr.v.begin(), arr.v.end(), S(0));
            continue;
        }
        size_t fan = 1;
        for (size_t d = 1; d < arr.shape.size(); ++d) fan *= size_t(arr.shape[d]);
        double a0 = 1.0 / std::sqrt(double(fan));
        RandomStream r(derive_seed(seed, "init", a));
        for (auto& x : arr.v) x = S(r.uniform_range(-a0, a0));
    }
}

template <class S>
void UNet2D<S>::block_fwd(const Block& b, const S* hin, int c, int hh, int ww, const S* e,
                          detail::BlockBuf<S>& buf, S* hout) const {
    size_t n = size_t(c) * hh * ww;
    resize(buf.in, n);
    resize(buf.t1, n);
    resize(buf.t2, n);
    resize(buf.t3, n);
    std::copy(hin, hin + n, buf.in.begin());
    kn::par::silu_fwd(hin, n, buf.t1.data());
    kn::par::conv3x3_fwd(buf.t1.data(), c, hh, ww, params.t[b.c1w].v.data(),
                         params.t[b.c1b].v.data(), c, 1, buf.t2.data());
    const S* pw = params.t[b.pw].v.data();
    const S* pb = params.t[b.pb].v.data();
    for (int ch = 0; ch < c; ++ch) {
        S shift = pb[ch];
        const S* row = pw + size_t(ch) * cfg.emb_dim;
        for (int d = 0; d < cfg.emb_dim; ++d) shift += row[d] * e[d];
        S* plane = buf.t2.data() + size_t(ch) * hh * ww;
        for (int k = 0; k < hh * ww; ++k) plane[k] += shift;
    }
    kn::par::silu_fwd(buf.t2.data(), n, buf.t3.data());
    kn::par::conv3x3_fwd(buf.t3.data(), c, hh, ww, params.t[b.c2w].v.data(),
                         params.t[b.c2b].v.data(), c, 1, hout);
    for (size_t k = 0; k < n; ++k) hout[k] += hin[k];
}

template <class S>
void UNet2D<S>::block_bwd(const Block& b, const S* dout, int c, int hh, int ww, const S* e,
                          const detail::BlockBuf<S>& buf, ParamStore<S>& g, S* dhin,
                          S* d_e) const {
    size_t n = size_t(c) * hh * ww;
    std::vector<S> d_t3(n), d_t2(n), d_t1(n);
    kn::par::conv3x3_bwd_weights(buf.t3.data(), c, hh, ww, dout, c, 1, g.t[b.c2w].v.data(),
                                 g.t[b.c2b].v.data());
    kn::par::conv3x3_bwd_input(dout, c, hh, ww, params.t[b.c2w].v.data(), c, 1, d_t3.data());
    kn::par::silu_bwd(buf.t2.data(), d_t3.data(), n, d_t2.data());
    // the embedding shift is broadcast over pixels, so its gradient is the
    // per-channel pixel sum
    const S* pw = params.t[b.pw].v.data();
    for (int ch = 0; ch < c; ++ch) {
        const S* plane = d_t2.data() + size_t(ch) * hh * ww;
        S gsum = S(0);
        for (int k = 0; k < hh * ww; ++k) gsum += plane[k];
        g.t[b.pb].v[ch] += gsum;
        S* grow = g.t[b.pw].v.data() + size_t(ch) * cfg.emb_dim;
        const S* wrow = pw + size_t(ch) * cfg.emb_dim;
        for (int d = 0; d < cfg.emb_dim; ++d) {
            grow[d] += gsum * e[d];
            d_e[d] += wrow[d] * gsum;
        }
    }
    kn::par::conv3x3_bwd_weights(buf.t1.data(), c, hh, ww, d_t2.data(), c, 1, g.t[b.c1w].v.data(),
                                 g.t[b.c1b].v.data());
    kn::par::conv3x3_bwd_input(d_t2.data(), c, hh, ww, params.t[b.c1w].v.data(), c, 1,
                               d_t1.data());
    kn::par::silu_bwd(buf.in.data(), d_t1.data(), n, dhin);
    for (size_t k = 0; k < n; ++k) dhin[k] += dout[k];
}

template <class S>
void UNet2D<S>::forward(const S* x, int h, int w, double t, double dose_bq, S* y,
                        detail::Workspace<S>& ws) const {
    if (h % 4 || w % 4) throw std::invalid_argument("UNet2D: h, w must be divisible by 4");
    ws.h = h;
    ws.w = w;
    int c0 = cfg.w0, c1 = cfg.w1, c2 = cfg.w2, D = cfg.emb_dim;
    int h2 = h / 2, w2 = w / 2, h4 = h / 4, w4 = w / 4;

    ws.feat = cond_features(cfg, t, dose_bq);
    resize(ws.e0, size_t(D));
    resize(ws.e0s, size_t(D));
    resize(ws.e, size_t(D));
    std::vector<S> featS(ws.feat.begin(), ws.feat.end());
    linear_fwd(params.t[i_fc1w].v.data(), params.t[i_fc1b].v.data(), featS.data(), D, D,
               ws.e0.data());
    kn::ref::silu_fwd(ws.e0.data(), size_t(D), ws.e0s.data());
    linear_fwd(params.t[i_fc2w].v.data(), params.t[i_fc2b].v.data(), ws.e0s.data(), D, D,
               ws.e.data());
    const S* e = ws.e.data();

    resize(ws.x, size_t(cfg.in_channels) * h * w);
    std::copy(x, x + ws.x.size(), ws.x.begin());
    resize(ws.h0, size_t(c0) * h * w);
    kn::par::conv3x3_fwd(x, cfg.in_channels, h, w, params.t[i_in_w].v.data(),
                         params.t[i_in_b].v.data(), c0, 1, ws.h0.data());

    resize(ws.b0, ws.h0.size());
    block_fwd(enc0, ws.h0.data(), c0, h, w, e, ws.blk[0], ws.b0.data());

    resize(ws.d0, size_t(c1) * h2 * w2);
    kn::par::conv3x3_fwd(ws.b0.data(), c0, h, w, params.t[i_dn0w].v.data(),
                         params.t[i_dn0b].v.data(), c1, 2, ws.d0.data());
    resize(ws.b1, ws.d0.size());
    block_fwd(enc1, ws.d0.data(), c1, h2, w2, e, ws.blk[1], ws.b1.data());

    resize(ws.d1, size_t(c2) * h4 * w4);
    kn::par::conv3x3_fwd(ws.b1.data(), c1, h2, w2, params.t[i_dn1w].v.data(),
                         params.t[i_dn1b].v.data(), c2, 2, ws.d1.data());
    resize(ws.m, ws.d1.size());
    block_fwd(mid, ws.d1.data(), c2, h4, w4, e, ws.blk[2], ws.m.data());

    resize(ws.n1, size_t(c2) * h2 * w2);
    kn::par::upsample2x_fwd(ws.m.data(), c2, h4, w4, ws.n1.data());
    resize(ws.u1a, size_t(c1) * h2 * w2);
    kn::par::conv3x3_fwd(ws.n1.data(), c2, h2, w2, params.t[i_up1w].v.data(),
                         params.t[i_up1b].v.data(), c1, 1, ws.u1a.data());
    for (size_t k = 0; k < ws.u1a.size(); ++k) ws.u1a[k] += ws.b1[k];  // skip join

    resize(ws.b2_, ws.u1a.size());
    block_fwd(dec1, ws.u1a.data(), c1, h2, w2, e, ws.blk[3], ws.b2_.data());

    resize(ws.n0, size_t(c1) * h * w);
    kn::par::upsample2x_fwd(ws.b2_.data(), c1, h2, w2, ws.n0.data());
    resize(ws.u0a, size_t(c0) * h * w);
    kn::par::conv3x3_fwd(ws.n0.data(), c1, h, w, params.t[i_up0w].v.data(),
                         params.t[i_up0b].v.data(), c0, 1, ws.u0a.data());
    for (size_t k = 0; k < ws.u0a.size(); ++k) ws.u0a[k] += ws.b0[k];  // skip join

    resize(ws.b3, ws.u0a.size());
    block_fwd(dec0, ws.u0a.data(), c0, h, w, e, ws.blk[4], ws.b3.data());

    resize(ws.hf, ws.b3.size());
    kn::par::silu_fwd(ws.b3.data(), ws.b3.size(), ws.hf.data());
    kn::par::conv3x3_fwd(ws.hf.data(), c0, h, w, params.t[i_out_w].v.data(),
                         params.t[i_out_b].v.data(), cfg.out_channels, 1, y);
}

template <class S>
void UNet2D<S>::backward(const S* dy, detail::Workspace<S>& ws, ParamStore<S>& g) const {
    int h = ws.h, w = ws.w;
    int c0 = cfg.w0, c1 = cfg.w1, c2 = cfg.w2, D = cfg.emb_dim;
    int h2 = h / 2, w2 = w / 2, h4 = h / 4, w4 = w / 4;
    const S* e = ws.e.data();

    resize(ws.d_e, size_t(D));
    std::fill(ws.d_e.begin(), ws.d_e.end(), S(0));

    std::vector<S> d_hf(size_t(c0) * h * w);
    kn::par::conv3x3_bwd_weights(ws.hf.data(), c0, h, w, dy, cfg.out_channels, 1,
                                 g.t[i_out_w].v.data(), g.t[i_out_b].v.data());
    kn::par::conv3x3_bwd_input(dy, cfg.out_channels, h, w, params.t[i_out_w].v.data(), c0, 1,
                               d_hf.data());
    std::vector<S> d_b3(d_hf.size());
    kn::par::silu_bwd(ws.b3.data(), d_hf.data(), d_hf.size(), d_b3.data());

    std::vector<S> d_u0a(d_b3.size());
    block_bwd(dec0, d_b3.data(), c0, h, w, e, ws.blk[4], g, d_u0a.data(), ws.d_e.data());

    // skip join: gradient flows to both the up path and the enc0 output
    std::vector<S> d_b0 = d_u0a;
    std::vector<S> d_n0(size_t(c1) * h * w);
    kn::par::conv3x3_bwd_weights(ws.n0.data(), c1, h, w, d_u0a.data(), c0, 1,
                                 g.t[i_up0w].v.data(), g.t[i_up0b].v.data());
    kn::par::conv3x3_bwd_input(d_u0a.data(), c0, h, w, params.t[i_up0w].v.data(), c1, 1,
                               d_n0.data());
    std::vector<S> d_b2(size_t(c1) * h2 * w2);
    kn::par::upsample2x_bwd(d_n0.data(), c1, h2, w2, d_b2.data());

    std::vector<S> d_u1a(d_b2.size());
    block_bwd(dec1, d_b2.data(), c1, h2, w2, e, ws.blk[3], g, d_u1a.data(), ws.d_e.data());

    std::vector<S> d_b1 = d_u1a;
    std::vector<S> d_n1(size_t(c2) * h2 * w2);
    kn::par::conv3x3_bwd_weights(ws.n1.data(), c2, h2, w2, d_u1a.data(), c1, 1,
                                 g.t[i_up1w].v.data(), g.t[i_up1b].v.data());
    kn::par::conv3x3_bwd_input(d_u1a.data(), c1, h2, w2, params.t[i_up1w].v.data(), c2, 1,
                               d_n1.data());
    std::vector<S> d_m(size_t(c2) * h4 * w4);
    kn::par::upsample2x_bwd(d_n1.data(), c2, h4, w4, d_m.data());

    std::vector<S> d_d1(d_m.size());
    block_bwd(mid, d_m.data(), c2, h4, w4, e, ws.blk[2], g, d_d1.data(), ws.d_e.data());

    kn::par::conv3x3_bwd_weights(ws.b1.data(), c1, h2, w2, d_d1.data(), c2, 2,
                                 g.t[i_dn1w].v.data(), g.t[i_dn1b].v.data());
    {
        std::vector<S> tmp(size_t(c1) * h2 * w2);
        kn::par::conv3x3_bwd_input(d_d1.data(), c2, h2, w2, params.t[i_dn1w].v.data(), c1, 2,
                                   tmp.data());
        for (size_t k = 0; k < d_b1.size(); ++k) d_b1[k] += tmp[k];
    }

    std::vector<S> d_d0(size_t(c1) * h2 * w2);
    block_bwd(enc1, d_b1.data(), c1, h2, w2, e, ws.blk[1], g, d_d0.data(), ws.d_e.data());

    kn::par::conv3x3_bwd_weights(ws.b0.data(), c0, h, w, d_d0.data(), c1, 2, g.t[i_dn0w].v.data(),
                                 g.t[i_dn0b].v.data());
    {
        std::vector<S> tmp(size_t(c0) * h * w);
        kn::par::conv3x3_bwd_input(d_d0.data(), c1, h, w, params.t[i_dn0w].v.data(), c0, 2,
                                   tmp.data());
        for (size_t k = 0; k < d_b0.size(); ++k) d_b0[k] += tmp[k];
    }

    std::vector<S> d_h0(size_t(c0) * h * w);
    block_bwd(enc0, d_b0.data(), c0, h, w, e, ws.blk[0], g, d_h0.data(), ws.d_e.data());

    kn::par::conv3x3_bwd_weights(ws.x.data(), cfg.in_channels, h, w, d_h0.data(), c0, 1,
                                 g.t[i_in_w].v.data(), g.t[i_in_b].v.data());
    // gradient w.r.t. the input image is not needed

    std::vector<S> d_e0s(size_t(D), S(0));
    linear_bwd(params.t[i_fc2w].v.data(), ws.e0s.data(), ws.d_e.data(), D, D,
               g.t[i_fc2w].v.data(), g.t[i_fc2b].v.data(), d_e0s.data());
    std::vector<S> d_e0(d_e0s.size());
    kn::ref::silu_bwd(ws.e0.data(), d_e0s.data(), size_t(D), d_e0.data());
    std::vector<S> featS(ws.feat.begin(), ws.feat.end());
    linear_bwd(params.t[i_fc1w].v.data(), featS.data(), d_e0.data(), D, D, g.t[i_fc1w].v.data(),
               g.t[i_fc1b].v.data(), static_cast<S*>(nullptr));
}

template class UNet2D<float>;
template class UNet2D<double>;

}  // namespace petdiff
