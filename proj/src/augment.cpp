#include <algorithm>
#include <cmath>
#include <numbers>

#include "painscope/data.hpp"
#include "painscope/rng.hpp"

namespace painscope {

namespace {

long reflect_index(long i, long n) {
    const long period = 2 * n;
    long m = i % period;
    if (m < 0) {
        m += period;
    }
    return m < n ? m : period - 1 - m;
}

struct Matrix2 {
    double a, b, c, d;
};

// A = R * Sh * Z, rotation counter-clockwise as displayed with y pointing down.
Matrix2 affine_matrix(const AffineParams& p) {
    const double t = p.rotation_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(t), sn = std::sin(t);
    const Matrix2 r{cs, sn, -sn, cs};
    const Matrix2 rs{r.a, r.a * p.shear + r.b, r.c, r.c * p.shear + r.d};
    return {rs.a * p.zoom, rs.b * p.zoom, rs.c * p.zoom, rs.d * p.zoom};
}

} // namespace

AugmentationConfig AugmentationConfig::identity(int count) {
    AugmentationConfig c;
    c.count = count;
    c.shift = 0.0;
    c.rotation_deg = 0.0;
    c.shear = 0.0;
    c.brightness_lo = c.brightness_hi = 1.0;
    c.zoom_lo = c.zoom_hi = 1.0;
    c.horizontal_flip = false;
    return c;
}

void affine_forward_point(const AffineParams& params, int size, double x, double y, double& out_x,
                          double& out_y) {
    const double centre = (size - 1) / 2.0;
    const Matrix2 m = affine_matrix(params);
    const double dx = x - centre, dy = y - centre;
    out_x = centre + m.a * dx + m.b * dy + params.shift_x;
    out_y = centre + m.c * dx + m.d * dy + params.shift_y;
}

Tensor apply_affine(const Tensor& image, const AffineParams& params) {
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    const Matrix2 m = affine_matrix(params);
    const double det = m.a * m.d - m.b * m.c;
    const Matrix2 inv{m.d / det, -m.b / det, -m.c / det, m.a / det};
    const double cx = (static_cast<double>(W) - 1.0) / 2.0;
    const double cy = (static_cast<double>(H) - 1.0) / 2.0;
    const long w = static_cast<long>(W), h = static_cast<long>(H);

    Tensor out(image.shape());
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            const double px = static_cast<double>(x) - cx - params.shift_x;
            const double py = static_cast<double>(y) - cy - params.shift_y;
            double qx = cx + inv.a * px + inv.b * py;
            const double qy = cy + inv.c * px + inv.d * py;
            if (params.flip) {
                qx = static_cast<double>(W) - 1.0 - qx;
            }
            const double fx = std::floor(qx), fy = std::floor(qy);
            const double wx = qx - fx, wy = qy - fy;
            const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
            const auto ix0 = static_cast<std::size_t>(reflect_index(x0, w));
            const auto ix1 = static_cast<std::size_t>(reflect_index(x0 + 1, w));
            const auto iy0 = static_cast<std::size_t>(reflect_index(y0, h));
            const auto iy1 = static_cast<std::size_t>(reflect_index(y0 + 1, h));
            for (std::size_t c = 0; c < C; ++c) {
                const double top = image.at(c, iy0, ix0) * (1.0 - wx) + image.at(c, iy0, ix1) * wx;
                const double bottom = image.at(c, iy1, ix0) * (1.0 - wx) + image.at(c, iy1, ix1) * wx;
                const double v = (top * (1.0 - wy) + bottom * wy) * params.brightness;
                out.at(c, y, x) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return out;
}

AffineParams draw_affine(const AugmentationConfig& config, int size, std::uint64_t seed) {
    Rng rng(seed);
    AffineParams p;
    p.shift_x = rng.uniform(-config.shift, config.shift) * size;
    p.shift_y = rng.uniform(-config.shift, config.shift) * size;
    p.rotation_deg = rng.uniform(-config.rotation_deg, config.rotation_deg);
    p.shear = rng.uniform(-config.shear, config.shear);
    p.zoom = rng.uniform(config.zoom_lo, config.zoom_hi);
    p.flip = config.horizontal_flip && rng.bernoulli(0.5);
    p.brightness = rng.uniform(config.brightness_lo, config.brightness_hi);
    return p;
}

std::vector<Sample> augment(const Sample& sample, const AugmentationConfig& config,
                            std::uint64_t seed) {
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(std::max(config.count, 0)));
    const int size = static_cast<int>(sample.image.dim(2));
    for (int i = 0; i < config.count; ++i) {
        const auto params =
            draw_affine(config, size, derive_seed(seed, "augment", static_cast<std::uint64_t>(i)));
        Sample s;
        s.image = apply_affine(sample.image, params);
        s.subject_id = sample.subject_id;
        s.source = sample.source;
        s.hard_label = sample.hard_label;
        s.nfcs = sample.nfcs;
        // Marker regions no longer line up after warping.
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace painscope
