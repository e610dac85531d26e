#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cascnn/image.hpp"

// Dataset plumbing: netpbm I/O, BT.601 luma conversion, patch extraction,
// (distorted, reference) pair construction, and a seeded synthetic corpus
// generator so every test runs without external data.

namespace cascnn::dataset {

// 8-bit interleaved RGB.
struct RgbImage {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> rgb;  // 3 * h * w
    std::string id;
};

// Binary PGM (P5) / PPM (P6), maxval 255, bit-exact round trip.
Image read_pgm(const std::string& path);
void write_pgm(const Image& img, const std::string& path);
RgbImage read_ppm(const std::string& path);
void write_ppm(const RgbImage& img, const std::string& path);

// Reads either format by magic; color inputs are converted to luma.
Image read_image_as_luma(const std::string& path);

// Full-range BT.601 (JPEG convention): Y = 0.299R + 0.587G + 0.114B,
// rounded to 8 bits then scaled to [0,1].
Image rgb_to_luma(const RgbImage& rgb);

// Chroma planes kept alongside luma so restored luma can be recombined.
struct YcbcrImage {
    Image y;
    std::vector<double> cb;  // full-range, in [0,255]
    std::vector<double> cr;
};
YcbcrImage rgb_to_ycbcr(const RgbImage& rgb);
RgbImage ycbcr_to_rgb(const YcbcrImage& img);

// Deterministic non-overlapping grid by default (stride = size); images
// smaller than the patch size are skipped.
std::vector<Image> extract_patches(const Image& img, int size = 120, int stride = 0);

enum class Split { Train, Val, Test };

struct PatchPair {
    Image reference;
    Image distorted;  // degrade(reference, qf)
    Split split;
    std::string id;
};

struct PatchSet {
    std::vector<PatchPair> pairs;
    int qf = 0;
    std::vector<const PatchPair*> split(Split s) const;
};

// Pairs every patch with its JPEG-degraded version and assigns seeded,
// disjoint splits with the given (train, val) fractions; the remainder
// goes to test.
PatchSet build_pairs(const std::vector<Image>& patches, int qf,
                     double train_ratio, double val_ratio, uint64_t seed);

// Manifest CSV: patch_id,source,qf,split.
void write_manifest(const PatchSet& set, const std::string& path);

// Seeded generator mixing smooth gradients, hard edges, sinusoidal textures
// and random rectangles; output is snapped to the 8-bit grid.
std::vector<Image> synth_corpus(int n, int size, uint64_t seed);

}  // namespace cascnn::dataset
