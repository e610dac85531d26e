#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cascnn/tensor.hpp"

namespace cascnn {

// Single-channel image with intensities in [0,1]. Stored in double so that
// "on the 8-bit grid" stays exact: pixel*255 is an integer up to fp noise.
struct Image {
    int h = 0;
    int w = 0;
    std::vector<double> pix;  // row-major, h*w
    std::string id;

    Image() = default;
    Image(int h_, int w_) : h(h_), w(w_), pix(size_t(h_) * w_, 0.0) {}

    double& at(int y, int x) { return pix[size_t(y) * w + x]; }
    double at(int y, int x) const { return pix[size_t(y) * w + x]; }
};

inline Image snap_to_8bit(Image img) {
    for (double& v : img.pix) {
        double q = std::round(std::min(1.0, std::max(0.0, v)) * 255.0);
        v = q / 255.0;
    }
    return img;
}

// [1,1,H,W] tensor from an image, and back (batch/channel index 0).
inline Tensor to_tensor(const Image& img) {
    Tensor t({1, 1, img.h, img.w});
    for (size_t i = 0; i < img.pix.size(); ++i) t.data[i] = static_cast<float>(img.pix[i]);
    return t;
}

inline Image from_tensor(const Tensor& t, int n = 0, int c = 0) {
    Image img(t.dim(2), t.dim(3));
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) img.at(y, x) = t.at(n, c, y, x);
    return img;
}

}  // namespace cascnn
