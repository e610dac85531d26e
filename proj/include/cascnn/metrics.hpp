#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cascnn/image.hpp"

// Full-reference quality metrics: MSE, PSNR, SSIM (uniform 8x8 windows),
// blocking effect factor, PSNR-B, and IPSNR/IPSNR-B deltas against a
// distorted baseline.

namespace cascnn::metrics {

struct SsimParams {
    double k1 = 0.01;
    double k2 = 0.03;
    int window = 8;     // uniform (all-ones) local statistics window
    double range = 1.0; // dynamic range L
};

double mse(const Image& ref, const Image& candidate);

// 10*log10(1/MSE) for [0,1] intensities; +infinity for identical images.
double psnr(const Image& ref, const Image& candidate);

// Mean over all valid stride-1 windows of the luminance/contrast/structure
// product. Symmetric in its arguments; 1 exactly for identical images.
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

// Yim-Bovik blocking effect factor: excess mean-squared difference of
// adjacent pixel pairs straddling block boundaries over interior pairs,
// weighted by log2(block)/log2(min(H,W)). Non-referenced; >= 0.
double bef(const Image& img, int block = 8);

// 10*log10(1/(MSE + BEF(candidate))). Always <= psnr.
double psnr_b(const Image& ref, const Image& candidate);

struct ImageMetrics {
    std::string image;
    double psnr;
    double psnr_b;
    double ssim;
    double ipsnr;    // NaN when no baseline was given
    double ipsnr_b;
};

struct MetricReport {
    std::vector<ImageMetrics> rows;
    ImageMetrics mean() const;  // arithmetic mean, image name "MEAN"
};

// Per-image metrics for (reference, candidate) pairs; when baselines are
// given, IPSNR/IPSNR-B are deltas against the same-reference baseline.
MetricReport evaluate(const std::vector<Image>& refs,
                      const std::vector<Image>& candidates,
                      const std::vector<Image>* baselines = nullptr);

// CSV layout: image,psnr,psnr_b,ssim,ipsnr,ipsnr_b with a final MEAN row.
void write_report_csv(const MetricReport& report, const std::string& path);

}  // namespace cascnn::metrics
