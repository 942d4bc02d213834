#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "spiralquiz/convolve.hpp"
#include "spiralquiz/image.hpp"

namespace spiralquiz {

/// Symmetry derivative of a Gaussian: kernel values are
/// (-1/sigma^2)^n (x+iy)^n g(x,y) for n >= 0 and the conjugate-power form
/// (x-iy)^|n| for n < 0, with g the unit-integral Gaussian of std sigma.
struct SymmetryFilter {
    int order_n = 0;
    double sigma = 1.0;
    ComplexImage kernel;
};

namespace detail {

inline int kernel_side(double sigma) { return 2 * static_cast<int>(std::ceil(4.0 * sigma)) + 1; }

/// 1-D kernel t^m * g1(t) with g1 the unit-integral Gaussian.
inline std::vector<double> gauss_moment_kernel(double sigma, int m) {
    const int r = static_cast<int>(std::ceil(4.0 * sigma));
    const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
    std::vector<double> k(2 * r + 1);
    for (int i = -r; i <= r; ++i) {
        double t = static_cast<double>(i);
        k[i + r] = std::pow(t, m) * std::exp(-t * t / (2.0 * sigma * sigma)) * norm;
    }
    return k;
}

inline double binomial(int n, int k) {
    double v = 1.0;
    for (int i = 1; i <= k; ++i) v = v * (n - k + i) / i;
    return v;
}

/// Complex convolution with Gamma^{n,sigma^2}, expanded into |n|+1 separable
/// real correlations per plane. The kernel's point symmetry turns the
/// convolution into (+1/sigma^2)^|n| times a sum of correlations.
inline ComplexImage conv_symmetry(const ComplexImage& h, int order_n, double sigma) {
    const int a = std::abs(order_n);
    const int s = order_n >= 0 ? 1 : -1;
    const int w = h.width, ht = h.height;
    const double c = std::pow(1.0 / (sigma * sigma), a);
    ComplexImage out(w, ht);
    for (int j = 0; j <= a; ++j) {
        auto kx = gauss_moment_kernel(sigma, a - j);
        auto ky = gauss_moment_kernel(sigma, j);
        std::vector<double> sep_re = separable_correlate(h.re, w, ht, kx, ky);
        std::vector<double> sep_im = separable_correlate(h.im, w, ht, kx, ky);
        double b = c * binomial(a, j);
        int phase = (s > 0) ? (j % 4) : ((4 - j % 4) % 4);  // (s*i)^j among {1, i, -1, -i}
        double cr = (phase == 0) ? b : (phase == 2) ? -b : 0.0;
        double ci = (phase == 1) ? b : (phase == 3) ? -b : 0.0;
        if (cr != 0.0) {
            for (size_t i = 0; i < out.re.size(); ++i) {
                out.re[i] += cr * sep_re[i];
                out.im[i] += cr * sep_im[i];
            }
        } else {
            for (size_t i = 0; i < out.re.size(); ++i) {
                out.re[i] -= ci * sep_im[i];
                out.im[i] += ci * sep_re[i];
            }
        }
    }
    return out;
}

}  // namespace detail

inline SymmetryFilter make_filter(int order_n, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("filter sigma must be > 0");
    const int side = detail::kernel_side(sigma);
    const int r = side / 2;
    const int a = std::abs(order_n);
    const int s = order_n >= 0 ? 1 : -1;
    const double c = std::pow(-1.0 / (sigma * sigma), a);
    const double gnorm = 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
    SymmetryFilter filt;
    filt.order_n = order_n;
    filt.sigma = sigma;
    filt.kernel = ComplexImage(side, side);
    for (int y = -r; y <= r; ++y) {
        for (int x = -r; x <= r; ++x) {
            std::complex<double> zp(static_cast<double>(x), static_cast<double>(s * y));
            std::complex<double> v = detail::ipow(zp, a);
            double g = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma)) * gnorm;
            filt.kernel.set(x + r, y + r, c * g * v);
        }
    }
    return filt;
}

/// Orientation tensor field h: the complex gradient of the Gaussian-smoothed
/// image, squared pixel-wise so opposite gradient directions reinforce.
inline ComplexImage orientation_tensor(const GrayImage& f, double sigma1) {
    const int side = detail::kernel_side(sigma1);
    if (f.width < side || f.height < side)
        throw std::invalid_argument("image smaller than the derivative kernel");
    std::vector<double> plane(f.samples.begin(), f.samples.end());
    auto g = detail::gauss_moment_kernel(sigma1, 0);
    auto tg = detail::gauss_moment_kernel(sigma1, 1);
    const double c = 1.0 / (sigma1 * sigma1);
    std::vector<double> gx = separable_correlate(plane, f.width, f.height, tg, g);
    std::vector<double> gy = separable_correlate(plane, f.width, f.height, g, tg);
    ComplexImage h(f.width, f.height);
    for (size_t i = 0; i < plane.size(); ++i) {
        double re = c * gx[i], im = c * gy[i];
        h.re[i] = re * re - im * im;
        h.im[i] = 2.0 * re * im;
    }
    return h;
}

inline ComplexImage i20_response(const ComplexImage& h, int order_n, double sigma2) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("filter sigma must be > 0");
    return detail::conv_symmetry(h, order_n, sigma2);
}

struct SpiralDetection {
    double center_x = 0.0;
    double center_y = 0.0;
    double magnitude = 0.0;
    double group_angle = 0.0;  // arg I20 at the peak, (-pi, pi]
    double decoded_phi = 0.0;  // group_angle / 2 reduced to [0, pi)
};

namespace detail {

inline double subpixel_offset(double lo, double mid, double hi) {
    double denom = lo - 2.0 * mid + hi;
    if (denom >= 0.0) return 0.0;
    double off = (lo - hi) / (2.0 * denom);
    return std::clamp(off, -0.5, 0.5);
}

inline double reduce_phi(double group_angle) {
    double phi = 0.5 * group_angle;
    while (phi < 0.0) phi += std::numbers::pi;
    while (phi >= std::numbers::pi) phi -= std::numbers::pi;
    return phi;
}

/// Pointwise upper bound on |I20|: |h| correlated with the filter magnitude
/// |Gamma^{-2}| = r^2 g / sigma^4. The ratio |I20| / blob_energy reaches 1
/// only where gradient orientations follow one double-angle pattern; arm
/// side lobes and incoherent clutter score well below it.
inline std::vector<double> blob_energy(const ComplexImage& h, double sigma) {
    const int w = h.width, ht = h.height;
    std::vector<double> mag(static_cast<size_t>(w) * ht);
    for (size_t i = 0; i < mag.size(); ++i) mag[i] = std::hypot(h.re[i], h.im[i]);
    auto g0 = gauss_moment_kernel(sigma, 0);
    auto g2 = gauss_moment_kernel(sigma, 2);
    std::vector<double> ex = separable_correlate(mag, w, ht, g2, g0);
    std::vector<double> ey = separable_correlate(mag, w, ht, g0, g2);
    const double c = 1.0 / (sigma * sigma * sigma * sigma);
    for (size_t i = 0; i < ex.size(); ++i) ex[i] = c * (ex[i] + ey[i]);
    return ex;
}

/// Peak picking on |I20|: median-ratio threshold, strict 8-neighbor maxima,
/// greedy non-maximum suppression, separable 3x3 quadratic sub-pixel fit.
/// With `energy` given, candidates below min_coherence * energy are dropped
/// before they can suppress or displace anything.
inline std::vector<SpiralDetection> pick_peaks(const ComplexImage& i20, double sigma2,
                                               int max_count, double min_ratio,
                                               const std::vector<double>* energy = nullptr,
                                               double min_coherence = 0.0) {
    const int w = i20.width, h = i20.height;
    std::vector<double> mag2(static_cast<size_t>(w) * h);
    for (size_t i = 0; i < mag2.size(); ++i)
        mag2[i] = i20.re[i] * i20.re[i] + i20.im[i] * i20.im[i];

    std::vector<double> sorted(mag2);
    size_t mid = sorted.size() / 2;
    std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
    double median2 = sorted[mid];
    double floor2 = 1e-14;  // blank images never clear this
    double thresh2 = std::max(min_ratio * min_ratio * median2, floor2);

    struct Candidate {
        double mag2;
        int x, y;
    };
    std::vector<Candidate> cands;
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            double v = mag2[static_cast<size_t>(y) * w + x];
            if (v < thresh2) continue;
            bool peak = true;
            for (int dy = -1; dy <= 1 && peak; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    if (mag2[static_cast<size_t>(y + dy) * w + (x + dx)] >= v) {
                        peak = false;
                        break;
                    }
                }
            if (peak) cands.push_back({v, x, y});
        }
    }
    std::sort(cands.begin(), cands.end(),
              [](const Candidate& a, const Candidate& b) { return a.mag2 > b.mag2; });

    const double nms2 = 4.0 * sigma2 * sigma2;
    std::vector<SpiralDetection> out;
    for (const auto& cand : cands) {
        if (static_cast<int>(out.size()) >= max_count) break;
        if (energy != nullptr) {
            double e = (*energy)[static_cast<size_t>(cand.y) * w + cand.x];
            if (std::sqrt(cand.mag2) < min_coherence * e) continue;
        }
        bool keep = true;
        for (const auto& d : out) {
            double dx = cand.x - d.center_x, dy = cand.y - d.center_y;
            if (dx * dx + dy * dy < nms2) {
                keep = false;
                break;
            }
        }
        if (!keep) continue;
        auto mag_at = [&](int x, int y) {
            return std::sqrt(mag2[static_cast<size_t>(y) * w + x]);
        };
        SpiralDetection det;
        det.center_x = cand.x + subpixel_offset(mag_at(cand.x - 1, cand.y), mag_at(cand.x, cand.y),
                                                mag_at(cand.x + 1, cand.y));
        det.center_y = cand.y + subpixel_offset(mag_at(cand.x, cand.y - 1), mag_at(cand.x, cand.y),
                                                mag_at(cand.x, cand.y + 1));
        det.magnitude = mag_at(cand.x, cand.y);
        det.group_angle = std::atan2(i20.im[static_cast<size_t>(cand.y) * w + cand.x],
                                     i20.re[static_cast<size_t>(cand.y) * w + cand.x]);
        det.decoded_phi = reduce_phi(det.group_angle);
        out.push_back(det);
    }
    return out;
}

}  // namespace detail

/// Minimum |I20| / blob_energy ratio for a peak to count as a pattern member.
/// Genuine spirals stay above 0.7 even with a 40% sector occluded, while arm
/// side lobes and incoherent clutter fall below 0.4. Compact high-contrast
/// blobs such as filled squares can still reach about 0.7, because their edge
/// gradients sweep the same double-angle range; callers that must tell those
/// apart validate survivors against the ink model (spiral_match_score).
inline constexpr double kMinSpiralCoherence = 0.65;

/// Find up to max_count spiral fiducials in an image. Peaks of |I20| must
/// exceed min_ratio times the image median and carry coherent orientation
/// structure; accepted peaks are separated by at least 2*sigma2 and refined
/// to sub-pixel position.
inline std::vector<SpiralDetection> detect_spirals(const GrayImage& f, double sigma1,
                                                   double sigma2, int max_count,
                                                   double min_ratio) {
    if (max_count < 1) throw std::invalid_argument("max_count must be >= 1");
    if (!(min_ratio > 1.0)) throw std::invalid_argument("min_ratio must be > 1");
    ComplexImage h = orientation_tensor(f, sigma1);
    ComplexImage i20 = i20_response(h, -2, sigma2);
    std::vector<double> energy = detail::blob_energy(h, sigma2);
    return detail::pick_peaks(i20, sigma2, max_count, min_ratio, &energy, kMinSpiralCoherence);
}

namespace detail {

/// I20 evaluated over a small window by direct correlation with the
/// materialized kernel; used by the coarse-to-fine sheet aligner. Matches
/// conv_symmetry up to the kernel's point symmetry sign.
inline ComplexImage i20_window(const ComplexImage& h, const SymmetryFilter& filt, int cx, int cy,
                               int radius) {
    const int side = filt.kernel.width;
    const int kr = side / 2;
    const double parity = (std::abs(filt.order_n) % 2 == 0) ? 1.0 : -1.0;
    ComplexImage out(2 * radius + 1, 2 * radius + 1);
    for (int oy = -radius; oy <= radius; ++oy) {
        for (int ox = -radius; ox <= radius; ++ox) {
            int px = cx + ox, py = cy + oy;
            double acc_re = 0.0, acc_im = 0.0;
            for (int ky = -kr; ky <= kr; ++ky) {
                int sy = reflect_index(py + ky, h.height);
                const double* hre = h.re.data() + static_cast<size_t>(sy) * h.width;
                const double* him = h.im.data() + static_cast<size_t>(sy) * h.width;
                const double* krow_re =
                    filt.kernel.re.data() + static_cast<size_t>(ky + kr) * side;
                const double* krow_im =
                    filt.kernel.im.data() + static_cast<size_t>(ky + kr) * side;
                for (int kx = -kr; kx <= kr; ++kx) {
                    int sx = reflect_index(px + kx, h.width);
                    double kre = krow_re[kx + kr], kim = krow_im[kx + kr];
                    acc_re += kre * hre[sx] - kim * him[sx];
                    acc_im += kre * him[sx] + kim * hre[sx];
                }
            }
            out.set(ox + radius, oy + radius, {parity * acc_re, parity * acc_im});
        }
    }
    return out;
}

}  // namespace detail

}  // namespace spiralquiz
