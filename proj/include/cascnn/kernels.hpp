#pragma once

#include <cstdint>

// OpenMP-parallel float kernels used by the autograd engine. Semantics are
// identical to the serial reference kernels in kernels_ref.hpp, which the
// test suite uses as the oracle. Same layouts: activations [N,C,H,W],
// conv weights [Co,Ci,3,3], transposed-conv weights [Ci,Co,4,4].

namespace cascnn::kernels {

void conv2d(const float* in, const float* w, const float* b, float* out,
            int N, int Ci, int Co, int H, int W);
void conv2d_grad_input(const float* gout, const float* w, float* gin,
                       int N, int Ci, int Co, int H, int W);
void conv2d_grad_params(const float* in, const float* gout, float* gw, float* gb,
                        int N, int Ci, int Co, int H, int W);

void tconv2d(const float* in, const float* w, const float* b, float* out,
             int N, int Ci, int Co, int H, int W);
void tconv2d_grad_input(const float* gout, const float* w, float* gin,
                        int N, int Ci, int Co, int H, int W);
void tconv2d_grad_params(const float* in, const float* gout, float* gw, float* gb,
                         int N, int Ci, int Co, int H, int W);

void avg_pool_2x2(const float* in, float* out, int N, int C, int H, int W);
void avg_pool_2x2_grad(const float* gout, float* gin, int N, int C, int H, int W);

void upsample_nearest_2x(const float* in, float* out, int N, int C, int H, int W);
void upsample_nearest_2x_grad(const float* gout, float* gin, int N, int C, int H, int W);

void prelu(const float* in, const float* slope, float* out, int N, int C, int64_t HW);
void prelu_grad(const float* in, const float* slope, const float* gout,
                float* gin, float* gslope, int N, int C, int64_t HW);

}  // namespace cascnn::kernels
