#pragma once

#include <cmath>
#include <cstddef>

// 2D compute kernels over [c][h][w] contiguous feature maps, 3x3 weights laid
// out [co][ci][3][3], padding 1. Two implementations with identical
// signatures: kn::ref is the straightforward serial derivation kept as the
// test oracle, kn::par is the OpenMP production path. par accumulates each
// output element inside one thread in a fixed order, so results do not depend
// on the thread count.
//
// Conventions: *_fwd and *_bwd_input overwrite their output, *_bwd_weights
// accumulates (callers sum gradients over a batch).

namespace petdiff::kn {

inline int conv_out_dim(int h, int stride) { return (h - 1) / stride + 1; }

namespace ref {

template <class S>
void conv3x3_fwd(const S* x, int ci, int h, int w, const S* wgt, const S* bias, int co,
                 int stride, S* y) {
    int oh = conv_out_dim(h, stride), ow = conv_out_dim(w, stride);
    for (int o = 0; o < co; ++o)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                S acc = bias[o];
                for (int c = 0; c < ci; ++c)
                    for (int u = 0; u < 3; ++u) {
                        int iy = i * stride + u - 1;
                        if (iy < 0 || iy >= h) continue;
                        for (int v = 0; v < 3; ++v) {
                            int ix = j * stride + v - 1;
                            if (ix < 0 || ix >= w) continue;
                            acc += wgt[((o * ci + c) * 3 + u) * 3 + v] * x[(c * h + iy) * w + ix];
                        }
                    }
                y[(o * oh + i) * ow + j] = acc;
            }
}

// scatter form: walk outputs and push contributions back to dx
template <class S>
void conv3x3_bwd_input(const S* dy, int co, int h, int w, const S* wgt, int ci, int stride,
                       S* dx) {
    int oh = conv_out_dim(h, stride), ow = conv_out_dim(w, stride);
    for (size_t k = 0; k < size_t(ci) * h * w; ++k) dx[k] = S(0);
    for (int o = 0; o < co; ++o)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                S g = dy[(o * oh + i) * ow + j];
                for (int c = 0; c < ci; ++c)
                    for (int u = 0; u < 3; ++u) {
                        int iy = i * stride + u - 1;
                        if (iy < 0 || iy >= h) continue;
                        for (int v = 0; v < 3; ++v) {
                            int ix = j * stride + v - 1;
                            if (ix < 0 || ix >= w) continue;
                            dx[(c * h + iy) * w + ix] += g * wgt[((o * ci + c) * 3 + u) * 3 + v];
                        }
                    }
            }
}

template <class S>
void conv3x3_bwd_weights(const S* x, int ci, int h, int w, const S* dy, int co, int stride,
                         S* dwgt, S* dbias) {
    int oh = conv_out_dim(h, stride), ow = conv_out_dim(w, stride);
    for (int o = 0; o < co; ++o)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                S g = dy[(o * oh + i) * ow + j];
                dbias[o] += g;
                for (int c = 0; c < ci; ++c)
                    for (int u = 0; u < 3; ++u) {
                        int iy = i * stride + u - 1;
                        if (iy < 0 || iy >= h) continue;
                        for (int v = 0; v < 3; ++v) {
                            int ix = j * stride + v - 1;
                            if (ix < 0 || ix >= w) continue;
                            dwgt[((o * ci + c) * 3 + u) * 3 + v] += g * x[(c * h + iy) * w + ix];
                        }
                    }
            }
}

template <class S>
void silu_fwd(const S* x, size_t n, S* y) {
    for (size_t i = 0; i < n; ++i) {
        S s = S(1) / (S(1) + std::exp(-x[i]));
        y[i] = x[i] * s;
    }
}

template <class S>
void silu_bwd(const S* x, const S* dy, size_t n, S* dx) {
    for (size_t i = 0; i < n; ++i) {
        S s = S(1) / (S(1) + std::exp(-x[i]));
        dx[i] = dy[i] * s * (S(1) + x[i] * (S(1) - s));
    }
}

template <class S>
void upsample2x_fwd(const S* x, int c, int h, int w, S* y) {
    for (int cc = 0; cc < c; ++cc)
        for (int i = 0; i < 2 * h; ++i)
            for (int j = 0; j < 2 * w; ++j)
                y[(cc * 2 * h + i) * 2 * w + j] = x[(cc * h + i / 2) * w + j / 2];
}

template <class S>
void upsample2x_bwd(const S* dy, int c, int h, int w, S* dx) {
    for (size_t k = 0; k < size_t(c) * h * w; ++k) dx[k] = S(0);
    for (int cc = 0; cc < c; ++cc)
        for (int i = 0; i < 2 * h; ++i)
            for (int j = 0; j < 2 * w; ++j)
                dx[(cc * h + i / 2) * w + j / 2] += dy[(cc * 2 * h + i) * 2 * w + j];
}

}  // namespace ref

namespace par {

template <class S>
void conv3x3_fwd(const S* x, int ci, int h, int w, const S* wgt, const S* bias, int co,
                 int stride, S* y) {
    int oh = conv_out_dim(h, stride), ow = conv_out_dim(w, stride);
#pragma omp parallel for collapse(2) schedule(static)
    for (int o = 0; o < co; ++o)
        for (int i = 0; i < oh; ++i) {
            S* yrow = y + (size_t(o) * oh + i) * ow;
            for (int j = 0; j < ow; ++j) yrow[j] = bias[o];
            for (int c = 0; c < ci; ++c)
                for (int u = 0; u < 3; ++u) {
                    int iy = i * stride + u - 1;
                    if (iy < 0 || iy >= h) continue;
                    const S* xrow = x + (size_t(c) * h + iy) * w;
                    const S* wk = wgt + ((size_t(o) * ci + c) * 3 + u) * 3;
                    if (stride == 1) {
                        // interior vectorizes; edge columns handled apart
                        if (w > 1) {
                            yrow[0] += wk[1] * xrow[0] + wk[2] * xrow[1];
                            yrow[ow - 1] += wk[0] * xrow[w - 2] + wk[1] * xrow[w - 1];
                        } else {
                            yrow[0] += wk[1] * xrow[0];
                        }
                        for (int j = 1; j < ow - 1; ++j)
                            yrow[j] += wk[0] * xrow[j - 1] + wk[1] * xrow[j] + wk[2] * xrow[j + 1];
                    } else {
                        for (int j = 0; j < ow; ++j) {
                            int ix = j * stride - 1;
                            S acc = S(0);
                            if (ix >= 0) acc += wk[0] * xrow[ix];
                            if (ix + 1 < w) acc += wk[1] * xrow[ix + 1];
                            if (ix + 2 < w) acc += wk[2] * xrow[ix + 2];
                            yrow[j] += acc;
                        }
                    }
                }
        }
}

// gather form: each dx element sums its own contributions, no write races
template <class S>
void conv3x3_bwd_input(const S* dy, int co, int h, int w, const S* wgt, int ci, int stride,
                       S* dx) {
    int oh = conv_out_dim(h, stride), ow = conv_out_dim(w, stride);
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < ci; ++c)
        for (int p = 0; p < h; ++p)
            for (int q = 0; q < w; ++q) {
                S acc = S(0);
                for (int u = 0; u < 3; ++u) {
                    int num_i = p + 1 - u;
                    if (num_i < 0 || num_i % stride) continue;
                    int i = num_i / stride;
                    if (i >= oh) continue;
                    for (int v = 0; v < 3; ++v) {
                        int num_j = q + 1 - v;
                        if (num_j < 0 || num_j % stride) continue;
                        int j = num_j / stride;
                        if (j >= ow) continue;
                        for (int o = 0; o < co; ++o)
                            acc += wgt[((size_t(o) * ci + c) * 3 + u) * 3 + v] *
                                   dy[(size_t(o) * oh + i) * ow + j];
                    }
                }
                dx[(size_t(c) * h + p) * w + q] = acc;
            }
}

template <class S>
void conv3x3_bwd_weights(const S* x, int ci, int h, int w, const S* dy, int co, int stride,
                         S* dwgt, S* dbias) {
    int oh = conv_out_dim(h, stride), ow = conv_out_dim(w, stride);
#pragma omp parallel for schedule(static)
    for (int o = 0; o < co; ++o) {
        const S* dyc = dy + size_t(o) * oh * ow;
        S bacc = S(0);
        for (int k = 0; k < oh * ow; ++k) bacc += dyc[k];
        dbias[o] += bacc;
        for (int c = 0; c < ci; ++c)
            for (int u = 0; u < 3; ++u)
                for (int v = 0; v < 3; ++v) {
                    S acc = S(0);
                    for (int i = 0; i < oh; ++i) {
                        int iy = i * stride + u - 1;
                        if (iy < 0 || iy >= h) continue;
                        const S* xrow = x + (size_t(c) * h + iy) * w;
                        const S* dyrow = dyc + size_t(i) * ow;
                        for (int j = 0; j < ow; ++j) {
                            int ix = j * stride + v - 1;
                            if (ix < 0 || ix >= w) continue;
                            acc += dyrow[j] * xrow[ix];
                        }
                    }
                    dwgt[((size_t(o) * ci + c) * 3 + u) * 3 + v] += acc;
                }
    }
}

template <class S>
void silu_fwd(const S* x, size_t n, S* y) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < (long long)n; ++i) {
        S s = S(1) / (S(1) + std::exp(-x[i]));
        y[i] = x[i] * s;
    }
}

template <class S>
void silu_bwd(const S* x, const S* dy, size_t n, S* dx) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < (long long)n; ++i) {
        S s = S(1) / (S(1) + std::exp(-x[i]));
        dx[i] = dy[i] * s * (S(1) + x[i] * (S(1) - s));
    }
}

template <class S>
void upsample2x_fwd(const S* x, int c, int h, int w, S* y) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int cc = 0; cc < c; ++cc)
        for (int i = 0; i < 2 * h; ++i) {
            const S* xrow = x + (size_t(cc) * h + i / 2) * w;
            S* yrow = y + (size_t(cc) * 2 * h + i) * 2 * w;
            for (int j = 0; j < 2 * w; ++j) yrow[j] = xrow[j / 2];
        }
}

template <class S>
void upsample2x_bwd(const S* dy, int c, int h, int w, S* dx) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int cc = 0; cc < c; ++cc)
        for (int i = 0; i < h; ++i) {
            const S* r0 = dy + (size_t(cc) * 2 * h + 2 * i) * 2 * w;
            const S* r1 = r0 + 2 * w;
            S* xrow = dx + (size_t(cc) * h + i) * w;
            for (int j = 0; j < w; ++j)
                xrow[j] = r0[2 * j] + r0[2 * j + 1] + r1[2 * j] + r1[2 * j + 1];
        }
}

}  // namespace par

}  // namespace petdiff::kn
