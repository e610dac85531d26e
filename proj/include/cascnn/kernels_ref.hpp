#pragma once

#include <cstdint>

// Serial reference kernels, templated on the scalar type. These are the
// plain nested-loop definitions of every operator: they serve as the
// correctness oracle for the parallel float kernels, as the 64-bit forward
// path for finite-difference gradient checking, and as the baseline in the
// kernel benchmarks. Keep them dumb.
//
// Layouts: activations [N,C,H,W] row-major; conv weights [Co,Ci,3,3];
// transposed-conv weights [Ci,Co,4,4] (stride 2, padding 1).

namespace cascnn::ref {

template <typename T>
void conv2d(const T* in, const T* w, const T* b, T* out,
            int N, int Ci, int Co, int H, int W) {
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co)
            for (int oh = 0; oh < H; ++oh)
                for (int ow = 0; ow < W; ++ow) {
                    T acc = b ? b[co] : T(0);
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int kh = 0; kh < 3; ++kh)
                            for (int kw = 0; kw < 3; ++kw) {
                                int ih = oh + kh - 1, iw = ow + kw - 1;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                acc += in[((int64_t(n) * Ci + ci) * H + ih) * W + iw] *
                                       w[((int64_t(co) * Ci + ci) * 3 + kh) * 3 + kw];
                            }
                    out[((int64_t(n) * Co + co) * H + oh) * W + ow] = acc;
                }
}

template <typename T>
void conv2d_grad_input(const T* gout, const T* w, T* gin,
                       int N, int Ci, int Co, int H, int W) {
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co)
            for (int oh = 0; oh < H; ++oh)
                for (int ow = 0; ow < W; ++ow) {
                    T g = gout[((int64_t(n) * Co + co) * H + oh) * W + ow];
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int kh = 0; kh < 3; ++kh)
                            for (int kw = 0; kw < 3; ++kw) {
                                int ih = oh + kh - 1, iw = ow + kw - 1;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                gin[((int64_t(n) * Ci + ci) * H + ih) * W + iw] +=
                                    g * w[((int64_t(co) * Ci + ci) * 3 + kh) * 3 + kw];
                            }
                }
}

template <typename T>
void conv2d_grad_params(const T* in, const T* gout, T* gw, T* gb,
                        int N, int Ci, int Co, int H, int W) {
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co)
            for (int oh = 0; oh < H; ++oh)
                for (int ow = 0; ow < W; ++ow) {
                    T g = gout[((int64_t(n) * Co + co) * H + oh) * W + ow];
                    if (gb) gb[co] += g;
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int kh = 0; kh < 3; ++kh)
                            for (int kw = 0; kw < 3; ++kw) {
                                int ih = oh + kh - 1, iw = ow + kw - 1;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                gw[((int64_t(co) * Ci + ci) * 3 + kh) * 3 + kw] +=
                                    g * in[((int64_t(n) * Ci + ci) * H + ih) * W + iw];
                            }
                }
}

// Transposed convolution, scatter form: each input pixel stamps a 4x4
// kernel into the 2x upsampled output at stride 2; padding 1 crops the
// border so the output is exactly [N,Co,2H,2W].
template <typename T>
void tconv2d(const T* in, const T* w, const T* b, T* out,
             int N, int Ci, int Co, int H, int W) {
    int OH = 2 * H, OW = 2 * W;
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co) {
            T* o = out + (int64_t(n) * Co + co) * OH * OW;
            for (int64_t i = 0; i < int64_t(OH) * OW; ++i) o[i] = b ? b[co] : T(0);
            for (int ci = 0; ci < Ci; ++ci)
                for (int h = 0; h < H; ++h)
                    for (int ww = 0; ww < W; ++ww) {
                        T v = in[((int64_t(n) * Ci + ci) * H + h) * W + ww];
                        for (int kh = 0; kh < 4; ++kh)
                            for (int kw = 0; kw < 4; ++kw) {
                                int oh = 2 * h - 1 + kh, ow = 2 * ww - 1 + kw;
                                if (oh < 0 || oh >= OH || ow < 0 || ow >= OW) continue;
                                o[int64_t(oh) * OW + ow] +=
                                    v * w[((int64_t(ci) * Co + co) * 4 + kh) * 4 + kw];
                            }
                    }
        }
}

template <typename T>
void tconv2d_grad_input(const T* gout, const T* w, T* gin,
                        int N, int Ci, int Co, int H, int W) {
    int OH = 2 * H, OW = 2 * W;
    for (int n = 0; n < N; ++n)
        for (int ci = 0; ci < Ci; ++ci)
            for (int h = 0; h < H; ++h)
                for (int ww = 0; ww < W; ++ww) {
                    T acc = 0;
                    for (int co = 0; co < Co; ++co)
                        for (int kh = 0; kh < 4; ++kh)
                            for (int kw = 0; kw < 4; ++kw) {
                                int oh = 2 * h - 1 + kh, ow = 2 * ww - 1 + kw;
                                if (oh < 0 || oh >= OH || ow < 0 || ow >= OW) continue;
                                acc += gout[((int64_t(n) * Co + co) * OH + oh) * OW + ow] *
                                       w[((int64_t(ci) * Co + co) * 4 + kh) * 4 + kw];
                            }
                    gin[((int64_t(n) * Ci + ci) * H + h) * W + ww] += acc;
                }
}

template <typename T>
void tconv2d_grad_params(const T* in, const T* gout, T* gw, T* gb,
                         int N, int Ci, int Co, int H, int W) {
    int OH = 2 * H, OW = 2 * W;
    if (gb)
        for (int n = 0; n < N; ++n)
            for (int co = 0; co < Co; ++co)
                for (int64_t i = 0; i < int64_t(OH) * OW; ++i)
                    gb[co] += gout[(int64_t(n) * Co + co) * OH * OW + i];
    for (int ci = 0; ci < Ci; ++ci)
        for (int co = 0; co < Co; ++co)
            for (int kh = 0; kh < 4; ++kh)
                for (int kw = 0; kw < 4; ++kw) {
                    T acc = 0;
                    for (int n = 0; n < N; ++n)
                        for (int h = 0; h < H; ++h)
                            for (int ww = 0; ww < W; ++ww) {
                                int oh = 2 * h - 1 + kh, ow = 2 * ww - 1 + kw;
                                if (oh < 0 || oh >= OH || ow < 0 || ow >= OW) continue;
                                acc += in[((int64_t(n) * Ci + ci) * H + h) * W + ww] *
                                       gout[((int64_t(n) * Co + co) * OH + oh) * OW + ow];
                            }
                    gw[((int64_t(ci) * Co + co) * 4 + kh) * 4 + kw] += acc;
                }
}

template <typename T>
void avg_pool_2x2(const T* in, T* out, int N, int C, int H, int W) {
    int OH = H / 2, OW = W / 2;
    for (int64_t nc = 0; nc < int64_t(N) * C; ++nc)
        for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
                const T* p = in + (nc * H + 2 * oh) * W + 2 * ow;
                out[(nc * OH + oh) * OW + ow] =
                    (p[0] + p[1] + p[W] + p[W + 1]) * T(0.25);
            }
}

template <typename T>
void avg_pool_2x2_grad(const T* gout, T* gin, int N, int C, int H, int W) {
    int OH = H / 2, OW = W / 2;
    for (int64_t nc = 0; nc < int64_t(N) * C; ++nc)
        for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
                T g = gout[(nc * OH + oh) * OW + ow] * T(0.25);
                T* p = gin + (nc * H + 2 * oh) * W + 2 * ow;
                p[0] += g; p[1] += g; p[W] += g; p[W + 1] += g;
            }
}

template <typename T>
void upsample_nearest_2x(const T* in, T* out, int N, int C, int H, int W) {
    int OW = 2 * W;
    for (int64_t nc = 0; nc < int64_t(N) * C; ++nc)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                T v = in[(nc * H + h) * W + w];
                T* o = out + (nc * 2 * H + 2 * h) * OW + 2 * w;
                o[0] = v; o[1] = v; o[OW] = v; o[OW + 1] = v;
            }
}

template <typename T>
void upsample_nearest_2x_grad(const T* gout, T* gin, int N, int C, int H, int W) {
    int OW = 2 * W;
    for (int64_t nc = 0; nc < int64_t(N) * C; ++nc)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                const T* o = gout + (nc * 2 * H + 2 * h) * OW + 2 * w;
                gin[(nc * H + h) * W + w] += o[0] + o[1] + o[OW] + o[OW + 1];
            }
}

// One learnable negative slope per channel.
template <typename T>
void prelu(const T* in, const T* slope, T* out, int N, int C, int64_t HW) {
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const T* x = in + (int64_t(n) * C + c) * HW;
            T* y = out + (int64_t(n) * C + c) * HW;
            T a = slope[c];
            for (int64_t i = 0; i < HW; ++i) y[i] = x[i] >= 0 ? x[i] : a * x[i];
        }
}

template <typename T>
void prelu_grad(const T* in, const T* slope, const T* gout,
                T* gin, T* gslope, int N, int C, int64_t HW) {
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const T* x = in + (int64_t(n) * C + c) * HW;
            const T* g = gout + (int64_t(n) * C + c) * HW;
            T a = slope[c];
            for (int64_t i = 0; i < HW; ++i) {
                if (x[i] >= 0) {
                    if (gin) gin[(int64_t(n) * C + c) * HW + i] += g[i];
                } else {
                    if (gin) gin[(int64_t(n) * C + c) * HW + i] += a * g[i];
                    if (gslope) gslope[c] += x[i] * g[i];
                }
            }
        }
}

template <typename T>
T mse(const T* a, const T* b, int64_t n) {
    T acc = 0;
    for (int64_t i = 0; i < n; ++i) {
        T d = a[i] - b[i];
        acc += d * d;
    }
    return acc / T(n);
}

}  // namespace cascnn::ref
