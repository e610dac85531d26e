#include "cascnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "cascnn/errors.hpp"
#include "cascnn/jpeg.hpp"

namespace cascnn::dataset {

namespace {

// Skips whitespace and '#' comments between netpbm header tokens.
int read_pnm_int(std::istream& is) {
    int c = is.get();
    while (c == '#' || std::isspace(c)) {
        if (c == '#')
            while (c != '\n' && c != EOF) c = is.get();
        c = is.get();
    }
    int v = 0;
    bool any = false;
    while (std::isdigit(c)) {
        v = v * 10 + (c - '0');
        any = true;
        c = is.get();
    }
    if (!any) throw IoError("malformed netpbm header");
    return v;
}

void check_pnm_dims(int w, int h, int maxval, const std::string& path) {
    if (w < 1 || h < 1) throw IoError("bad image dimensions in " + path);
    if (maxval != 255) throw IoError("only maxval 255 supported: " + path);
}

void atomic_write(const std::string& path, const std::string& header,
                  const std::vector<uint8_t>& payload) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os << header;
        os.write(reinterpret_cast<const char*>(payload.data()),
                 static_cast<std::streamsize>(payload.size()));
        if (!os) throw IoError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("cannot rename " + tmp + " to " + path);
}

}  // namespace

Image read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char m0 = char(is.get()), m1 = char(is.get());
    if (m0 != 'P' || m1 != '5') throw IoError("not a binary PGM (P5): " + path);
    int w = read_pnm_int(is), h = read_pnm_int(is), maxval = read_pnm_int(is);
    check_pnm_dims(w, h, maxval, path);
    std::vector<uint8_t> buf(size_t(w) * h);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw IoError("truncated PGM: " + path);
    Image img(h, w);
    img.id = path;
    for (size_t i = 0; i < buf.size(); ++i) img.pix[i] = buf[i] / 255.0;
    return img;
}

void write_pgm(const Image& img, const std::string& path) {
    std::vector<uint8_t> buf(img.pix.size());
    for (size_t i = 0; i < buf.size(); ++i) {
        double v = std::round(std::clamp(img.pix[i], 0.0, 1.0) * 255.0);
        buf[i] = static_cast<uint8_t>(v);
    }
    atomic_write(path,
                 "P5\n" + std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n",
                 buf);
}

RgbImage read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char m0 = char(is.get()), m1 = char(is.get());
    if (m0 != 'P' || m1 != '6') throw IoError("not a binary PPM (P6): " + path);
    int w = read_pnm_int(is), h = read_pnm_int(is), maxval = read_pnm_int(is);
    check_pnm_dims(w, h, maxval, path);
    RgbImage img;
    img.w = w;
    img.h = h;
    img.id = path;
    img.rgb.resize(size_t(w) * h * 3);
    is.read(reinterpret_cast<char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
    if (!is) throw IoError("truncated PPM: " + path);
    return img;
}

void write_ppm(const RgbImage& img, const std::string& path) {
    atomic_write(path,
                 "P6\n" + std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n",
                 img.rgb);
}

Image read_image_as_luma(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char m0 = char(is.get()), m1 = char(is.get());
    is.close();
    if (m0 != 'P') throw IoError("unsupported image format: " + path);
    if (m1 == '5') return read_pgm(path);
    if (m1 == '6') return rgb_to_luma(read_ppm(path));
    throw IoError("unsupported netpbm variant in " + path);
}

Image rgb_to_luma(const RgbImage& rgb) {
    Image img(rgb.h, rgb.w);
    img.id = rgb.id;
    for (size_t i = 0; i < img.pix.size(); ++i) {
        const uint8_t* p = &rgb.rgb[3 * i];
        double y = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        img.pix[i] = std::round(y) / 255.0;
    }
    return img;
}

YcbcrImage rgb_to_ycbcr(const RgbImage& rgb) {
    YcbcrImage out;
    out.y = Image(rgb.h, rgb.w);
    out.y.id = rgb.id;
    out.cb.resize(out.y.pix.size());
    out.cr.resize(out.y.pix.size());
    for (size_t i = 0; i < out.y.pix.size(); ++i) {
        const uint8_t* p = &rgb.rgb[3 * i];
        double r = p[0], g = p[1], b = p[2];
        double y = 0.299 * r + 0.587 * g + 0.114 * b;
        out.y.pix[i] = std::round(y) / 255.0;
        out.cb[i] = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
        out.cr[i] = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    }
    return out;
}

RgbImage ycbcr_to_rgb(const YcbcrImage& img) {
    RgbImage out;
    out.h = img.y.h;
    out.w = img.y.w;
    out.id = img.y.id;
    out.rgb.resize(img.y.pix.size() * 3);
    for (size_t i = 0; i < img.y.pix.size(); ++i) {
        double y = img.y.pix[i] * 255.0;
        double cb = img.cb[i] - 128.0, cr = img.cr[i] - 128.0;
        double r = y + 1.402 * cr;
        double g = y - 0.344136 * cb - 0.714136 * cr;
        double b = y + 1.772 * cb;
        out.rgb[3 * i + 0] = static_cast<uint8_t>(std::clamp(std::round(r), 0.0, 255.0));
        out.rgb[3 * i + 1] = static_cast<uint8_t>(std::clamp(std::round(g), 0.0, 255.0));
        out.rgb[3 * i + 2] = static_cast<uint8_t>(std::clamp(std::round(b), 0.0, 255.0));
    }
    return out;
}

std::vector<Image> extract_patches(const Image& img, int size, int stride) {
    if (stride <= 0) stride = size;
    std::vector<Image> out;
    if (img.h < size || img.w < size) return out;
    for (int y = 0; y + size <= img.h; y += stride)
        for (int x = 0; x + size <= img.w; x += stride) {
            Image p(size, size);
            p.id = img.id + "+" + std::to_string(x) + "+" + std::to_string(y);
            for (int dy = 0; dy < size; ++dy)
                for (int dx = 0; dx < size; ++dx) p.at(dy, dx) = img.at(y + dy, x + dx);
            out.push_back(std::move(p));
        }
    return out;
}

std::vector<const PatchPair*> PatchSet::split(Split s) const {
    std::vector<const PatchPair*> out;
    for (const PatchPair& p : pairs)
        if (p.split == s) out.push_back(&p);
    return out;
}

PatchSet build_pairs(const std::vector<Image>& patches, int qf,
                     double train_ratio, double val_ratio, uint64_t seed) {
    if (patches.empty()) throw ConfigError("build_pairs: no input patches");
    PatchSet set;
    set.qf = qf;
    std::vector<size_t> order(patches.size());
    std::iota(order.begin(), order.end(), size_t(0));
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    size_t n_train = static_cast<size_t>(std::llround(train_ratio * double(patches.size())));
    size_t n_val = static_cast<size_t>(std::llround(val_ratio * double(patches.size())));
    n_train = std::min(n_train, patches.size());
    n_val = std::min(n_val, patches.size() - n_train);
    for (size_t i = 0; i < order.size(); ++i) {
        PatchPair p;
        p.reference = patches[order[i]];
        p.distorted = jpeg::degrade(p.reference, qf);
        p.split = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
        p.id = "patch" + std::to_string(order[i]);
        set.pairs.push_back(std::move(p));
    }
    return set;
}

void write_manifest(const PatchSet& set, const std::string& path) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os << "patch_id,source,qf,split\n";
        for (const PatchPair& p : set.pairs) {
            const char* s = p.split == Split::Train ? "train"
                            : p.split == Split::Val ? "val"
                                                    : "test";
            os << p.id << "," << p.reference.id << "," << set.qf << "," << s << "\n";
        }
        if (!os) throw IoError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("cannot rename " + tmp + " to " + path);
}

std::vector<Image> synth_corpus(int n, int size, uint64_t seed) {
    if (n < 1) throw ConfigError("synth_corpus: n must be >= 1");
    std::mt19937_64 rng(seed);
    auto unif = [&rng](double lo, double hi) {
        double u = double(rng() >> 11) * (1.0 / 9007199254740992.0);
        return lo + u * (hi - lo);
    };
    std::vector<Image> out;
    const double pi = std::acos(-1.0);
    for (int k = 0; k < n; ++k) {
        Image img(size, size);
        img.id = "synth" + std::to_string(k);
        // Smooth base gradient.
        double gx = unif(-1, 1), gy = unif(-1, 1), g0 = unif(0.2, 0.8);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                img.at(y, x) = g0 + 0.4 * (gx * x + gy * y) / double(size);
        // Sinusoidal textures provoke ringing.
        int waves = 1 + int(rng() % 3);
        for (int t = 0; t < waves; ++t) {
            double fx = unif(0.05, 0.45) * 2 * pi, fy = unif(0.05, 0.45) * 2 * pi;
            double amp = unif(0.03, 0.15), ph = unif(0, 2 * pi);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x)
                    img.at(y, x) += amp * std::sin(fx * x + fy * y + ph);
        }
        // Hard-edged rectangles provoke blocking and ringing.
        int rects = 2 + int(rng() % 4);
        for (int t = 0; t < rects; ++t) {
            int rw = 2 + int(rng() % std::max(1, size / 2));
            int rh = 2 + int(rng() % std::max(1, size / 2));
            int rx = int(rng() % std::max<uint64_t>(1, uint64_t(size - rw)));
            int ry = int(rng() % std::max<uint64_t>(1, uint64_t(size - rh)));
            double v = unif(0.0, 1.0);
            for (int y = ry; y < ry + rh; ++y)
                for (int x = rx; x < rx + rw; ++x)
                    img.at(y, x) = 0.3 * img.at(y, x) + 0.7 * v;
        }
        out.push_back(snap_to_8bit(std::move(img)));
    }
    return out;
}

}  // namespace cascnn::dataset
