#include "cascnn/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "cascnn/errors.hpp"

namespace cascnn::metrics {

namespace {
void check_pair(const Image& a, const Image& b, const char* what) {
    if (a.h != b.h || a.w != b.w)
        throw ShapeError(std::string(what) + ": image size mismatch " +
                         std::to_string(a.h) + "x" + std::to_string(a.w) + " vs " +
                         std::to_string(b.h) + "x" + std::to_string(b.w));
}
}  // namespace

double mse(const Image& ref, const Image& candidate) {
    check_pair(ref, candidate, "mse");
    double acc = 0.0;
    for (size_t i = 0; i < ref.pix.size(); ++i) {
        double d = ref.pix[i] - candidate.pix[i];
        acc += d * d;
    }
    return acc / double(ref.pix.size());
}

double psnr(const Image& ref, const Image& candidate) {
    double m = mse(ref, candidate);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

double ssim(const Image& a, const Image& b, const SsimParams& p) {
    check_pair(a, b, "ssim");
    int win = p.window;
    if (a.h < win || a.w < win)
        throw ShapeError("ssim: image smaller than the " + std::to_string(win) +
                         "x" + std::to_string(win) + " window");
    double c1 = (p.k1 * p.range) * (p.k1 * p.range);
    double c2 = (p.k2 * p.range) * (p.k2 * p.range);
    double n = double(win) * win;
    double total = 0.0;
    int64_t windows = 0;
    for (int y = 0; y + win <= a.h; ++y)
        for (int x = 0; x + win <= a.w; ++x) {
            double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
            for (int dy = 0; dy < win; ++dy)
                for (int dx = 0; dx < win; ++dx) {
                    double u = a.at(y + dy, x + dx), v = b.at(y + dy, x + dx);
                    sx += u; sy += v;
                    sxx += u * u; syy += v * v; sxy += u * v;
                }
            double mx = sx / n, my = sy / n;
            double vx = sxx / n - mx * mx;
            double vy = syy / n - my * my;
            double cov = sxy / n - mx * my;
            total += ((2 * mx * my + c1) * (2 * cov + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++windows;
        }
    return total / double(windows);
}

double bef(const Image& img, int block) {
    if (img.h < 2 * block || img.w < 2 * block)
        throw ShapeError("bef: image must be at least twice the block size");
    // Horizontal pairs (x, x+1): boundary when x+1 is a multiple of block.
    double db = 0, dc = 0;
    int64_t nb = 0, nc = 0;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x + 1 < img.w; ++x) {
            double d = img.at(y, x) - img.at(y, x + 1);
            if ((x + 1) % block == 0) { db += d * d; ++nb; }
            else                      { dc += d * d; ++nc; }
        }
    // Vertical pairs (y, y+1).
    for (int y = 0; y + 1 < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double d = img.at(y, x) - img.at(y + 1, x);
            if ((y + 1) % block == 0) { db += d * d; ++nb; }
            else                      { dc += d * d; ++nc; }
        }
    db /= double(nb);
    dc /= double(nc);
    double eta = std::log2(double(block)) / std::log2(double(std::min(img.h, img.w)));
    return eta * std::max(db - dc, 0.0);
}

double psnr_b(const Image& ref, const Image& candidate) {
    double denom = mse(ref, candidate) + bef(candidate);
    if (denom == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / denom);
}

ImageMetrics MetricReport::mean() const {
    ImageMetrics m{"MEAN", 0, 0, 0, 0, 0};
    if (rows.empty()) return m;
    for (const ImageMetrics& r : rows) {
        m.psnr += r.psnr;
        m.psnr_b += r.psnr_b;
        m.ssim += r.ssim;
        m.ipsnr += r.ipsnr;
        m.ipsnr_b += r.ipsnr_b;
    }
    double n = double(rows.size());
    m.psnr /= n; m.psnr_b /= n; m.ssim /= n; m.ipsnr /= n; m.ipsnr_b /= n;
    return m;
}

MetricReport evaluate(const std::vector<Image>& refs,
                      const std::vector<Image>& candidates,
                      const std::vector<Image>* baselines) {
    if (refs.size() != candidates.size() ||
        (baselines && baselines->size() != refs.size()))
        throw ShapeError("evaluate: corpus size mismatch");
    MetricReport rep;
    double nan = std::numeric_limits<double>::quiet_NaN();
    // Two infinite PSNRs (candidate == baseline == reference grid) is a
    // zero improvement, not inf - inf.
    auto delta = [](double a, double b) {
        return (std::isinf(a) && std::isinf(b)) ? 0.0 : a - b;
    };
    for (size_t i = 0; i < refs.size(); ++i) {
        ImageMetrics m;
        m.image = refs[i].id.empty() ? "img" + std::to_string(i) : refs[i].id;
        m.psnr = psnr(refs[i], candidates[i]);
        m.psnr_b = psnr_b(refs[i], candidates[i]);
        m.ssim = ssim(refs[i], candidates[i]);
        if (baselines) {
            m.ipsnr = delta(m.psnr, psnr(refs[i], (*baselines)[i]));
            m.ipsnr_b = delta(m.psnr_b, psnr_b(refs[i], (*baselines)[i]));
        } else {
            m.ipsnr = nan;
            m.ipsnr_b = nan;
        }
        rep.rows.push_back(m);
    }
    return rep;
}

void write_report_csv(const MetricReport& report, const std::string& path) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        os << "image,psnr,psnr_b,ssim,ipsnr,ipsnr_b\n";
        auto emit = [&os](const ImageMetrics& m) {
            char buf[256];
            std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                          m.image.c_str(), m.psnr, m.psnr_b, m.ssim, m.ipsnr, m.ipsnr_b);
            os << buf;
        };
        for (const ImageMetrics& m : report.rows) emit(m);
        emit(report.mean());
        if (!os) throw IoError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("cannot rename " + tmp + " to " + path);
}

}  // namespace cascnn::metrics
