#include "cascnn/jpeg.hpp"

#include <algorithm>
#include <cmath>

#include "cascnn/errors.hpp"

namespace cascnn::jpeg {

const QuantTable kBaseLumaTable = {
    16, 11, 10, 16, 24,  40,  51,  61,
    12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,
    14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,
    24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99};

QuantTable scale_table(const QuantTable& base, int qf) {
    if (qf < 1 || qf > 100)
        throw ConfigError("quality factor must be in [1,100], got " + std::to_string(qf));
    int s = qf < 50 ? 5000 / qf : 200 - 2 * qf;
    QuantTable out{};
    for (int i = 0; i < 64; ++i)
        out[i] = std::clamp((base[i] * s + 50) / 100, 1, 255);
    return out;
}

namespace {

// cos((2x+1) u pi / 16) with the orthonormal scale a(u)/2 folded in.
struct DctBasis {
    double c[8][8];
    DctBasis() {
        const double pi = std::acos(-1.0);
        for (int u = 0; u < 8; ++u) {
            double a = u == 0 ? std::sqrt(0.125) : 0.5;
            for (int x = 0; x < 8; ++x)
                c[u][x] = a * std::cos((2 * x + 1) * u * pi / 16.0);
        }
    }
};
const DctBasis kBasis;

}  // namespace

void dct8(const double in[64], double out[64]) {
    double tmp[64];
    for (int u = 0; u < 8; ++u)  // rows
        for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += kBasis.c[u][k] * in[x * 8 + k];
            tmp[x * 8 + u] = acc;
        }
    for (int v = 0; v < 8; ++v)  // columns
        for (int u = 0; u < 8; ++u) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += kBasis.c[v][k] * tmp[k * 8 + u];
            out[v * 8 + u] = acc;
        }
}

void idct8(const double in[64], double out[64]) {
    double tmp[64];
    for (int x = 0; x < 8; ++x)
        for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += kBasis.c[k][x] * in[v * 8 + k];
            tmp[v * 8 + x] = acc;
        }
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += kBasis.c[k][y] * tmp[k * 8 + x];
            out[y * 8 + x] = acc;
        }
}

Image degrade(const Image& luma, int qf) {
    if (luma.h < 1 || luma.w < 1) throw ShapeError("degrade: empty image");
    QuantTable q = scale_table(kBaseLumaTable, qf);

    int ph = (luma.h + 7) / 8 * 8, pw = (luma.w + 7) / 8 * 8;
    // Edge-replicated pad, scaled to [0,255] and level-shifted by -128.
    std::vector<double> pad(size_t(ph) * pw);
    for (int y = 0; y < ph; ++y) {
        int sy = std::min(y, luma.h - 1);
        for (int x = 0; x < pw; ++x) {
            int sx = std::min(x, luma.w - 1);
            pad[size_t(y) * pw + x] = luma.at(sy, sx) * 255.0 - 128.0;
        }
    }

    for (int by = 0; by < ph; by += 8)
        for (int bx = 0; bx < pw; bx += 8) {
            double block[64], coef[64];
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    block[y * 8 + x] = pad[size_t(by + y) * pw + bx + x];
            dct8(block, coef);
            for (int i = 0; i < 64; ++i)
                coef[i] = std::round(coef[i] / q[i]) * q[i];
            idct8(coef, block);
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    pad[size_t(by + y) * pw + bx + x] = block[y * 8 + x];
        }

    Image out(luma.h, luma.w);
    out.id = luma.id;
    for (int y = 0; y < luma.h; ++y)
        for (int x = 0; x < luma.w; ++x) {
            double v = std::round(pad[size_t(y) * pw + x] + 128.0);  // bit depth 8
            out.at(y, x) = std::clamp(v, 0.0, 255.0) / 255.0;
        }
    return out;
}

}  // namespace cascnn::jpeg
