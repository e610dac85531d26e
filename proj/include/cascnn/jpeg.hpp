#pragma once

#include <array>

#include "cascnn/image.hpp"

// JPEG-degradation simulator: 8x8 block DCT, quality-scaled quantization,
// dequantization and inverse DCT on luma images. No entropy coding; only
// the pixel-domain artifacts matter here.

namespace cascnn::jpeg {

using QuantTable = std::array<int, 64>;

// ITU-T T.81 Annex K luminance base table.
extern const QuantTable kBaseLumaTable;

// IJG quality scaling: s = 5000/qf (qf < 50) or 200 - 2*qf, each entry
// floor((q*s + 50)/100) clamped to [1, 255]. qf must be in [1, 100].
QuantTable scale_table(const QuantTable& base, int qf);

// Orthonormal 2-D type-II DCT of an 8x8 block and its inverse.
void dct8(const double in[64], double out[64]);
void idct8(const double in[64], double out[64]);

// Compress-decompress round trip at the given quality factor. Input may be
// any size; it is padded to a multiple of 8 by edge replication internally
// and cropped back. Output is clamped and on the 8-bit grid.
Image degrade(const Image& luma, int qf);

}  // namespace cascnn::jpeg
