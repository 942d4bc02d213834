#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spiralquiz/image.hpp"

namespace spiralquiz {

/// One member of a symmetric pattern family. `family_n` selects the family,
/// `phi` the member within it; phi lives in [0, pi) because members repeat
/// with period pi.
struct PatternSpec {
    int family_n = -2;
    double phi = 0.0;
    double extent_sigma = 10.0;  // Gaussian envelope std, pixels
    int patch_size = 81;         // odd side length
    double frequency = 9.2;      // ring-density constant of the log family

    static int min_patch_size(double extent_sigma) {
        int n = static_cast<int>(std::ceil(8.0 * extent_sigma));
        return (n % 2 == 0) ? n + 1 : n;
    }

    static PatternSpec make(int family_n, double phi, double extent_sigma, int patch_size = 0,
                            double frequency = 9.2) {
        if (!(extent_sigma > 0.0)) throw std::invalid_argument("extent_sigma must be > 0");
        PatternSpec spec;
        spec.family_n = family_n;
        spec.phi = canonical_phi(phi);
        spec.extent_sigma = extent_sigma;
        spec.frequency = frequency;
        int min_size = min_patch_size(extent_sigma);
        if (patch_size == 0) patch_size = min_size;
        if (patch_size % 2 == 0) throw std::invalid_argument("patch_size must be odd");
        if (patch_size < min_size) throw std::invalid_argument("patch_size below 8*extent_sigma");
        spec.patch_size = patch_size;
        return spec;
    }

    static double canonical_phi(double phi) {
        double p = std::fmod(phi, std::numbers::pi);
        if (p < 0.0) p += std::numbers::pi;
        return p;
    }
};

/// Real and imaginary parts of q(z) = z^(n/2+1)/(n/2+1), z = x + iy, with the
/// n = -2 member integrating to log z instead. The pair satisfies the
/// Cauchy-Riemann equations away from the origin.
inline std::pair<double, double> harmonic_pair(int family_n, double x, double y) {
    if (family_n == -2) {
        double r2 = x * x + y * y;
        if (r2 == 0.0) throw std::domain_error("log family is singular at the origin");
        double theta = std::atan2(y, x);
        if (theta == -std::numbers::pi) theta = std::numbers::pi;
        return {0.5 * std::log(r2), theta};
    }
    std::complex<double> z(x, y);
    if (family_n % 2 == 0) {
        int m = family_n / 2 + 1;
        if (m < 0 && z == 0.0) throw std::domain_error("family is singular at the origin");
        if (m == 1) return {x, y};
        std::complex<double> q = detail::ipow(z, m) / static_cast<double>(m);
        return {q.real(), q.imag()};
    }
    double p = 0.5 * family_n + 1.0;
    if (z == 0.0) {
        if (p <= 0.0) throw std::domain_error("family is singular at the origin");
        return {0.0, 0.0};
    }
    std::complex<double> q = std::pow(z, p) / p;
    return {q.real(), q.imag()};
}

/// Radial/tangential frequencies for a log-family member. The tangential
/// frequency is rounded to a whole arm count so the pattern is seamless
/// across the theta branch cut; the radial part compensates so that
/// atan2(tangential, radial) stays exactly phi.
struct SpiralFrequency {
    double radial = 0.0;
    double tangential = 0.0;
};

inline SpiralFrequency spiral_frequency(double k, double phi) {
    double s = std::sin(phi);
    if (s <= 0.0) return {k, 0.0};
    double m = std::round(k * s);
    if (m < 1.0) m = 1.0;
    return {m * std::cos(phi) / s, m};
}

namespace detail {

inline double pattern_phase(const PatternSpec& spec, double dx, double dy) {
    if (spec.family_n == -2) {
        SpiralFrequency freq = spiral_frequency(spec.frequency, spec.phi);
        // Radius normalized by the envelope scale: renders at different
        // extents are exact zooms of one another.
        double r = std::max(std::hypot(dx, dy) / spec.extent_sigma, 0.03);
        return freq.radial * std::log(r) + freq.tangential * std::atan2(dy, dx);
    }
    // Non-log families: coordinates normalized to the envelope scale and a
    // 2*pi base frequency keep the iso-curve density resolution-independent.
    auto [xi, eta] = harmonic_pair(spec.family_n, dx / spec.extent_sigma, dy / spec.extent_sigma);
    return 2.0 * std::numbers::pi * (std::cos(spec.phi) * xi + std::sin(spec.phi) * eta);
}

}  // namespace detail

/// Render one pattern member: cos(phase)+1 under a Gaussian envelope, cut at
/// 4 sigma and rescaled to [0,1]. Background is 0. The log-family center
/// pixel is in-painted from its 8-neighborhood.
inline GrayImage render_pattern(const PatternSpec& spec) {
    const int n = spec.patch_size;
    const int c = n / 2;
    const double sigma = spec.extent_sigma;
    GrayImage out(n, n, 0.0f);
    double maxval = 0.0;
    std::vector<double> raw(static_cast<size_t>(n) * n, 0.0);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            double dx = x - c, dy = y - c;
            double r2 = dx * dx + dy * dy;
            if (r2 > 16.0 * sigma * sigma) continue;
            bool singular = (r2 == 0.0 && spec.family_n < 0);
            if (singular) continue;  // filled below
            double w = std::exp(-r2 / (2.0 * sigma * sigma));
            double v = (std::cos(detail::pattern_phase(spec, dx, dy)) + 1.0) * w;
            raw[static_cast<size_t>(y) * n + x] = v;
            maxval = std::max(maxval, v);
        }
    }
    if (maxval <= 0.0) maxval = 1.0;
    for (size_t i = 0; i < raw.size(); ++i)
        out.samples[i] = static_cast<float>(raw[i] / maxval);
    if (spec.family_n < 0) {
        float acc = 0.0f;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                if (dx != 0 || dy != 0) acc += out.at(c + dx, c + dy);
        out.at(c, c) = acc / 8.0f;
    }
    return out;
}

/// Stamp a log-family member onto a sheet as ink fading to paper: the
/// envelope blends the oscillation toward white, so the fiducial sits on the
/// page without a dark halo. Sub-pixel centers are supported.
inline void stamp_spiral(GrayImage& sheet, Vec2 center, double extent_sigma, double phi,
                         double frequency) {
    SpiralFrequency freq = spiral_frequency(frequency, PatternSpec::canonical_phi(phi));
    const double cut = 4.0 * extent_sigma;
    int x0 = std::max(0, static_cast<int>(std::floor(center.x - cut)));
    int x1 = std::min(sheet.width - 1, static_cast<int>(std::ceil(center.x + cut)));
    int y0 = std::max(0, static_cast<int>(std::floor(center.y - cut)));
    int y1 = std::min(sheet.height - 1, static_cast<int>(std::ceil(center.y + cut)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            double dx = x - center.x, dy = y - center.y;
            double r2 = dx * dx + dy * dy;
            if (r2 > cut * cut) continue;
            double w = std::exp(-r2 / (2.0 * extent_sigma * extent_sigma));
            double r = std::max(std::sqrt(r2) / extent_sigma, 0.03);
            double u = freq.radial * std::log(r) + freq.tangential * std::atan2(dy, dx);
            double p = 0.5 * (std::cos(u) + 1.0);
            double v = 1.0 - w * (1.0 - p);
            sheet.at(x, y) = static_cast<float>(sheet.at(x, y) * v);
        }
    }
}

namespace detail {

inline double parabola_step(double lo, double mid, double hi) {
    double den = lo - 2.0 * mid + hi;
    if (den >= 0.0) return 0.0;
    double s = (lo - hi) / (2.0 * den);
    return std::clamp(s, -0.5, 0.5);
}

struct InkSample {
    double x, y, v;
};

/// Pixels dark enough to be ink within `radius` of (cx, cy). Paper white and
/// white occlusions are dropped here once, so fits over the same
/// neighbourhood can reuse the list.
inline std::vector<InkSample> gather_ink(const GrayImage& img, double cx, double cy,
                                         double radius) {
    std::vector<InkSample> ink;
    int x0 = std::max(0, static_cast<int>(cx - radius) - 1);
    int x1 = std::min(img.width - 1, static_cast<int>(cx + radius) + 1);
    int y0 = std::max(0, static_cast<int>(cy - radius) - 1);
    int y1 = std::min(img.height - 1, static_cast<int>(cy + radius) + 1);
    const double r2max = radius * radius;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            double dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy > r2max) continue;
            float v = img.at(x, y);
            if (v < 0.8f) ink.push_back({static_cast<double>(x), static_cast<double>(y), v});
        }
    }
    return ink;
}

/// Least-squares fit of inked pixels to the stamped-ink model
/// c0 + c1 w + c2 w cos u + c3 w sin u, where w is the envelope and u the
/// spiral phase about a candidate center (cx, cy). The free cos/sin pair
/// absorbs an arbitrary pattern rotation. Returns the fraction of the
/// envelope-only residual explained by the oscillatory pair: near 1 for a
/// member, near 0 for solid blobs, text, or anything without the member's
/// ring structure. White pixels never appear in `ink`, so occluded sectors
/// carry no weight.
inline double spiral_fit_score(const std::vector<InkSample>& ink, double cx, double cy,
                               double extent_sigma, const SpiralFrequency& freq) {
    const double r2max = 3.5 * extent_sigma * 3.5 * extent_sigma;
    const double inv2s2 = 1.0 / (2.0 * extent_sigma * extent_sigma);
    double N[4][4] = {};
    double rhs[4] = {};
    double yy = 0.0;
    long count = 0;
    for (const auto& p : ink) {
        double dx = p.x - cx, dy = p.y - cy;
        double r2 = dx * dx + dy * dy;
        if (r2 > r2max) continue;
        double w = std::exp(-r2 * inv2s2);
        double r = std::max(std::sqrt(r2) / extent_sigma, 0.03);
        double u = freq.radial * std::log(r) + freq.tangential * std::atan2(dy, dx);
        double reg[4] = {1.0, w, w * std::cos(u), w * std::sin(u)};
        for (int i = 0; i < 4; ++i) {
            for (int j = i; j < 4; ++j) N[i][j] += reg[i] * reg[j];
            rhs[i] += reg[i] * p.v;
        }
        yy += p.v * p.v;
        ++count;
    }
    if (count < 40) return 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < i; ++j) N[i][j] = N[j][i];
    auto solve_sse = [&](int k) {
        double A[4][5];
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) A[i][j] = N[i][j];
            A[i][k] = rhs[i];
        }
        for (int col = 0; col < k; ++col) {
            int piv = col;
            for (int row = col + 1; row < k; ++row)
                if (std::fabs(A[row][col]) > std::fabs(A[piv][col])) piv = row;
            std::swap(A[piv], A[col]);
            if (std::fabs(A[col][col]) < 1e-12) return yy;
            for (int row = col + 1; row < k; ++row) {
                double f = A[row][col] / A[col][col];
                for (int c = col; c <= k; ++c) A[row][c] -= f * A[col][c];
            }
        }
        double coef[4] = {};
        for (int i = k - 1; i >= 0; --i) {
            double s = A[i][k];
            for (int j = i + 1; j < k; ++j) s -= A[i][j] * coef[j];
            coef[i] = s / A[i][i];
        }
        double sse = yy;
        for (int i = 0; i < k; ++i) sse -= coef[i] * rhs[i];
        return std::max(sse, 0.0);
    };
    double sse_envelope = solve_sse(2);
    double sse_full = solve_sse(4);
    if (sse_envelope <= 1e-12) return 0.0;
    return std::clamp((sse_envelope - sse_full) / sse_envelope, 0.0, 1.0);
}

}  // namespace detail

/// How well the ink around `center` matches a member of extent `extent_sigma`
/// and angle `phi`, in [0, 1]. Insensitive to pattern rotation and to white
/// occlusion; drops sharply when `center` is off by more than a pixel.
inline double spiral_match_score(const GrayImage& img, Vec2 center, double extent_sigma,
                                 double phi, double frequency = 9.2) {
    SpiralFrequency freq = spiral_frequency(frequency, PatternSpec::canonical_phi(phi));
    std::vector<detail::InkSample> ink =
        detail::gather_ink(img, center.x, center.y, 3.5 * extent_sigma);
    return detail::spiral_fit_score(ink, center.x, center.y, extent_sigma, freq);
}

/// Refine an approximate spiral center to the position where the ink best
/// fits the member model. Searches a shrinking grid (reach about 3 px) and
/// finishes with a parabolic step. White pixels never enter the fit, so
/// occluded sectors cannot pull the estimate. The first grid step must stay
/// at one pixel: the fit's true basin is only about a pixel wide, and coarser
/// steps can hop onto an arm-period side optimum.
inline Vec2 refine_spiral_center(const GrayImage& img, Vec2 approx, double extent_sigma,
                                 double phi, double frequency = 9.2) {
    SpiralFrequency freq = spiral_frequency(frequency, PatternSpec::canonical_phi(phi));
    std::vector<detail::InkSample> ink =
        detail::gather_ink(img, approx.x, approx.y, 3.5 * extent_sigma + 8.0);
    auto score = [&](double cx, double cy) {
        return detail::spiral_fit_score(ink, cx, cy, extent_sigma, freq);
    };
    double bx = approx.x, by = approx.y;
    const double steps[] = {1.0, 0.5, 0.2, 0.08};
    for (double step : steps) {
        double best = -1.0, nx = bx, ny = by;
        for (int iy = -2; iy <= 2; ++iy) {
            for (int ix = -2; ix <= 2; ++ix) {
                double v = score(bx + ix * step, by + iy * step);
                if (v > best) {
                    best = v;
                    nx = bx + ix * step;
                    ny = by + iy * step;
                }
            }
        }
        bx = nx;
        by = ny;
    }
    const double d = 0.08;
    double mid = score(bx, by);
    bx += d * detail::parabola_step(score(bx - d, by), mid, score(bx + d, by));
    by += d * detail::parabola_step(score(bx, by - d), mid, score(bx, by + d));
    return {bx, by};
}

}  // namespace spiralquiz
