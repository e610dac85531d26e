#include "cascnn/kernels.hpp"

#include <algorithm>

// Row-wise loop structure throughout: the innermost loop runs over
// contiguous image columns so the compiler can vectorize it, and OpenMP
// parallelism is over independent output slabs (no write sharing).

namespace cascnn::kernels {

void conv2d(const float* in, const float* w, const float* b, float* out,
            int N, int Ci, int Co, int H, int W) {
    int64_t plane = int64_t(H) * W;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co) {
            float* o = out + (int64_t(n) * Co + co) * plane;
            float bias = b ? b[co] : 0.0f;
            std::fill(o, o + plane, bias);
            for (int ci = 0; ci < Ci; ++ci) {
                const float* x = in + (int64_t(n) * Ci + ci) * plane;
                const float* wk = w + (int64_t(co) * Ci + ci) * 9;
                for (int kh = 0; kh < 3; ++kh)
                    for (int kw = 0; kw < 3; ++kw) {
                        float wv = wk[kh * 3 + kw];
                        int ow0 = std::max(0, 1 - kw);
                        int ow1 = std::min(W, W + 1 - kw);
                        for (int oh = 0; oh < H; ++oh) {
                            int ih = oh + kh - 1;
                            if (ih < 0 || ih >= H) continue;
                            float* orow = o + int64_t(oh) * W;
                            const float* xrow = x + int64_t(ih) * W + (kw - 1);
                            for (int ow = ow0; ow < ow1; ++ow)
                                orow[ow] += wv * xrow[ow];
                        }
                    }
            }
        }
}

void conv2d_grad_input(const float* gout, const float* w, float* gin,
                       int N, int Ci, int Co, int H, int W) {
    int64_t plane = int64_t(H) * W;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int ci = 0; ci < Ci; ++ci) {
            float* gi = gin + (int64_t(n) * Ci + ci) * plane;
            for (int co = 0; co < Co; ++co) {
                const float* go = gout + (int64_t(n) * Co + co) * plane;
                const float* wk = w + (int64_t(co) * Ci + ci) * 9;
                for (int kh = 0; kh < 3; ++kh)
                    for (int kw = 0; kw < 3; ++kw) {
                        float wv = wk[kh * 3 + kw];
                        // gin[ih][iw] += wv * gout[ih-kh+1][iw-kw+1]
                        int iw0 = std::max(0, kw - 1);
                        int iw1 = std::min(W, W + kw - 1);
                        for (int ih = 0; ih < H; ++ih) {
                            int oh = ih - kh + 1;
                            if (oh < 0 || oh >= H) continue;
                            float* girow = gi + int64_t(ih) * W;
                            const float* gorow = go + int64_t(oh) * W - (kw - 1);
                            for (int iw = iw0; iw < iw1; ++iw)
                                girow[iw] += wv * gorow[iw];
                        }
                    }
            }
        }
}

void conv2d_grad_params(const float* in, const float* gout, float* gw, float* gb,
                        int N, int Ci, int Co, int H, int W) {
    int64_t plane = int64_t(H) * W;
#pragma omp parallel for schedule(static)
    for (int co = 0; co < Co; ++co) {
        double bacc = 0.0;
        for (int n = 0; n < N; ++n) {
            const float* go = gout + (int64_t(n) * Co + co) * plane;
            if (gb)
                for (int64_t i = 0; i < plane; ++i) bacc += go[i];
            for (int ci = 0; ci < Ci; ++ci) {
                const float* x = in + (int64_t(n) * Ci + ci) * plane;
                float* gwk = gw + (int64_t(co) * Ci + ci) * 9;
                for (int kh = 0; kh < 3; ++kh)
                    for (int kw = 0; kw < 3; ++kw) {
                        int ow0 = std::max(0, 1 - kw);
                        int ow1 = std::min(W, W + 1 - kw);
                        float acc = 0.0f;
                        for (int oh = 0; oh < H; ++oh) {
                            int ih = oh + kh - 1;
                            if (ih < 0 || ih >= H) continue;
                            const float* gorow = go + int64_t(oh) * W;
                            const float* xrow = x + int64_t(ih) * W + (kw - 1);
                            for (int ow = ow0; ow < ow1; ++ow)
                                acc += gorow[ow] * xrow[ow];
                        }
                        gwk[kh * 3 + kw] += acc;
                    }
            }
        }
        if (gb) gb[co] += static_cast<float>(bacc);
    }
}

namespace {
// Valid input-column range so that ow = 2*w - 1 + kw stays inside [0, 2W).
inline void tconv_range(int k, int n_in, int& w0, int& w1) {
    w0 = (k == 0) ? 1 : 0;
    w1 = (k == 3) ? n_in - 1 : n_in;
}
}  // namespace

void tconv2d(const float* in, const float* w, const float* b, float* out,
             int N, int Ci, int Co, int H, int W) {
    int OH = 2 * H, OW = 2 * W;
    int64_t oplane = int64_t(OH) * OW, iplane = int64_t(H) * W;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co) {
            float* o = out + (int64_t(n) * Co + co) * oplane;
            float bias = b ? b[co] : 0.0f;
            std::fill(o, o + oplane, bias);
            for (int ci = 0; ci < Ci; ++ci) {
                const float* x = in + (int64_t(n) * Ci + ci) * iplane;
                const float* wk = w + (int64_t(ci) * Co + co) * 16;
                for (int kh = 0; kh < 4; ++kh) {
                    int h0, h1;
                    tconv_range(kh, H, h0, h1);
                    for (int kw = 0; kw < 4; ++kw) {
                        float wv = wk[kh * 4 + kw];
                        int w0, w1;
                        tconv_range(kw, W, w0, w1);
                        for (int h = h0; h < h1; ++h) {
                            const float* xrow = x + int64_t(h) * W;
                            float* orow = o + int64_t(2 * h - 1 + kh) * OW + (kw - 1);
                            for (int ww = w0; ww < w1; ++ww)
                                orow[2 * ww] += wv * xrow[ww];
                        }
                    }
                }
            }
        }
}

void tconv2d_grad_input(const float* gout, const float* w, float* gin,
                        int N, int Ci, int Co, int H, int W) {
    int OH = 2 * H, OW = 2 * W;
    int64_t oplane = int64_t(OH) * OW, iplane = int64_t(H) * W;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < N; ++n)
        for (int ci = 0; ci < Ci; ++ci) {
            float* gi = gin + (int64_t(n) * Ci + ci) * iplane;
            for (int co = 0; co < Co; ++co) {
                const float* go = gout + (int64_t(n) * Co + co) * oplane;
                const float* wk = w + (int64_t(ci) * Co + co) * 16;
                for (int kh = 0; kh < 4; ++kh) {
                    int h0, h1;
                    tconv_range(kh, H, h0, h1);
                    for (int kw = 0; kw < 4; ++kw) {
                        float wv = wk[kh * 4 + kw];
                        int w0, w1;
                        tconv_range(kw, W, w0, w1);
                        for (int h = h0; h < h1; ++h) {
                            float* girow = gi + int64_t(h) * W;
                            const float* gorow = go + int64_t(2 * h - 1 + kh) * OW + (kw - 1);
                            for (int ww = w0; ww < w1; ++ww)
                                girow[ww] += wv * gorow[2 * ww];
                        }
                    }
                }
            }
        }
}

void tconv2d_grad_params(const float* in, const float* gout, float* gw, float* gb,
                         int N, int Ci, int Co, int H, int W) {
    int OH = 2 * H, OW = 2 * W;
    int64_t oplane = int64_t(OH) * OW, iplane = int64_t(H) * W;
    if (gb) {
#pragma omp parallel for schedule(static)
        for (int co = 0; co < Co; ++co) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n) {
                const float* go = gout + (int64_t(n) * Co + co) * oplane;
                for (int64_t i = 0; i < oplane; ++i) acc += go[i];
            }
            gb[co] += static_cast<float>(acc);
        }
    }
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < Ci; ++ci) {
        for (int co = 0; co < Co; ++co) {
            float* gwk = gw + (int64_t(ci) * Co + co) * 16;
            for (int kh = 0; kh < 4; ++kh) {
                int h0, h1;
                tconv_range(kh, H, h0, h1);
                for (int kw = 0; kw < 4; ++kw) {
                    int w0, w1;
                    tconv_range(kw, W, w0, w1);
                    float acc = 0.0f;
                    for (int n = 0; n < N; ++n) {
                        const float* x = in + (int64_t(n) * Ci + ci) * iplane;
                        const float* go = gout + (int64_t(n) * Co + co) * oplane;
                        for (int h = h0; h < h1; ++h) {
                            const float* xrow = x + int64_t(h) * W;
                            const float* gorow = go + int64_t(2 * h - 1 + kh) * OW + (kw - 1);
                            for (int ww = w0; ww < w1; ++ww)
                                acc += xrow[ww] * gorow[2 * ww];
                        }
                    }
                    gwk[kh * 4 + kw] += acc;
                }
            }
        }
    }
}

void avg_pool_2x2(const float* in, float* out, int N, int C, int H, int W) {
    int OH = H / 2, OW = W / 2;
    int64_t NC = int64_t(N) * C;
#pragma omp parallel for schedule(static)
    for (int64_t nc = 0; nc < NC; ++nc)
        for (int oh = 0; oh < OH; ++oh) {
            const float* p = in + (nc * H + 2 * oh) * W;
            float* o = out + (nc * OH + oh) * OW;
            for (int ow = 0; ow < OW; ++ow)
                o[ow] = (p[2 * ow] + p[2 * ow + 1] + p[2 * ow + W] + p[2 * ow + W + 1]) * 0.25f;
        }
}

void avg_pool_2x2_grad(const float* gout, float* gin, int N, int C, int H, int W) {
    int OH = H / 2, OW = W / 2;
    int64_t NC = int64_t(N) * C;
#pragma omp parallel for schedule(static)
    for (int64_t nc = 0; nc < NC; ++nc)
        for (int oh = 0; oh < OH; ++oh) {
            const float* go = gout + (nc * OH + oh) * OW;
            float* gi = gin + (nc * H + 2 * oh) * W;
            for (int ow = 0; ow < OW; ++ow) {
                float g = go[ow] * 0.25f;
                gi[2 * ow] += g;
                gi[2 * ow + 1] += g;
                gi[2 * ow + W] += g;
                gi[2 * ow + W + 1] += g;
            }
        }
}

void upsample_nearest_2x(const float* in, float* out, int N, int C, int H, int W) {
    int OW = 2 * W;
    int64_t NC = int64_t(N) * C;
#pragma omp parallel for schedule(static)
    for (int64_t nc = 0; nc < NC; ++nc)
        for (int h = 0; h < H; ++h) {
            const float* x = in + (nc * H + h) * W;
            float* o = out + (nc * 2 * H + 2 * h) * OW;
            for (int w = 0; w < W; ++w) {
                float v = x[w];
                o[2 * w] = v;
                o[2 * w + 1] = v;
                o[2 * w + OW] = v;
                o[2 * w + OW + 1] = v;
            }
        }
}

void upsample_nearest_2x_grad(const float* gout, float* gin, int N, int C, int H, int W) {
    int OW = 2 * W;
    int64_t NC = int64_t(N) * C;
#pragma omp parallel for schedule(static)
    for (int64_t nc = 0; nc < NC; ++nc)
        for (int h = 0; h < H; ++h) {
            const float* o = gout + (nc * 2 * H + 2 * h) * OW;
            float* gi = gin + (nc * H + h) * W;
            for (int w = 0; w < W; ++w)
                gi[w] += o[2 * w] + o[2 * w + 1] + o[2 * w + OW] + o[2 * w + OW + 1];
        }
}

void prelu(const float* in, const float* slope, float* out, int N, int C, int64_t HW) {
    int64_t NC = int64_t(N) * C;
#pragma omp parallel for schedule(static)
    for (int64_t nc = 0; nc < NC; ++nc) {
        const float* x = in + nc * HW;
        float* y = out + nc * HW;
        float a = slope[nc % C];
        for (int64_t i = 0; i < HW; ++i) y[i] = x[i] >= 0.0f ? x[i] : a * x[i];
    }
}

void prelu_grad(const float* in, const float* slope, const float* gout,
                float* gin, float* gslope, int N, int C, int64_t HW) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        float a = slope[c];
        double sacc = 0.0;
        for (int n = 0; n < N; ++n) {
            int64_t off = (int64_t(n) * C + c) * HW;
            const float* x = in + off;
            const float* g = gout + off;
            float* gi = gin ? gin + off : nullptr;
            for (int64_t i = 0; i < HW; ++i) {
                if (x[i] >= 0.0f) {
                    if (gi) gi[i] += g[i];
                } else {
                    if (gi) gi[i] += a * g[i];
                    sacc += double(x[i]) * g[i];
                }
            }
        }
        if (gslope) gslope[c] += static_cast<float>(sacc);
    }
}

}  // namespace cascnn::kernels
