#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include <spiralquiz/image.hpp>
#include <spiralquiz/pattern.hpp>

using namespace spiralquiz;
using Catch::Approx;

namespace {
constexpr double kPi = std::numbers::pi;

double ratio_fit_residual(const GrayImage& img, int row_a, int row_b, int x0, int x1) {
    double num = 0.0, den = 0.0;
    for (int x = x0; x <= x1; ++x) {
        num += img.at(x, row_a) * img.at(x, row_b);
        den += img.at(x, row_a) * img.at(x, row_a);
    }
    double s = num / den;
    double worst = 0.0;
    for (int x = x0; x <= x1; ++x)
        worst = std::max(worst, std::fabs(s * img.at(x, row_a) - img.at(x, row_b)));
    return worst;
}

GrayImage warp_about_center(const GrayImage& src, double rotation, double scale,
                            int out_size, float fill) {
    SimilarityTransform m;
    m.rotation = rotation;
    m.scale = scale;
    double cs = (src.width - 1) / 2.0, co = (out_size - 1) / 2.0;
    Vec2 rc = m.apply({co, co});
    m.translation = {cs - rc.x, cs - rc.y};
    return warp_similarity(src, m, out_size, out_size, fill);
}

// RMS over an annulus. The core oscillates faster than the pixel grid and is
// excluded; bilinear interpolation is only meaningful outside it.
double annulus_rms(const GrayImage& a, const GrayImage& b, double r_in, double r_out) {
    REQUIRE(a.width == b.width);
    REQUIRE(a.height == b.height);
    double c = (a.width - 1) / 2.0;
    double acc = 0.0;
    long count = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            double dx = x - c, dy = y - c;
            double d2 = dx * dx + dy * dy;
            if (d2 > r_out * r_out || d2 < r_in * r_in) continue;
            double d = a.at(x, y) - b.at(x, y);
            acc += d * d;
            ++count;
        }
    return std::sqrt(acc / count);
}

// RMS after fitting one scalar gain, cancelling the per-render [0,1] rescale.
double annulus_ratio_rms(const GrayImage& a, const GrayImage& b, double r_in, double r_out) {
    REQUIRE(a.width == b.width);
    REQUIRE(a.height == b.height);
    double c = (a.width - 1) / 2.0;
    double num = 0.0, den = 0.0;
    auto inside = [&](int x, int y) {
        double dx = x - c, dy = y - c;
        double d2 = dx * dx + dy * dy;
        return d2 <= r_out * r_out && d2 >= r_in * r_in;
    };
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x)
            if (inside(x, y)) {
                num += a.at(x, y) * b.at(x, y);
                den += a.at(x, y) * a.at(x, y);
            }
    REQUIRE(den > 0.0);
    double s = num / den;
    double acc = 0.0;
    long count = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x)
            if (inside(x, y)) {
                double d = s * a.at(x, y) - b.at(x, y);
                acc += d * d;
                ++count;
            }
    return std::sqrt(acc / count);
}
}  // namespace

TEST_CASE("harmonic pair known values") {
    auto [xi0, eta0] = harmonic_pair(-2, 1.0, 0.0);
    CHECK(xi0 == Approx(0.0).margin(1e-15));
    CHECK(eta0 == Approx(0.0).margin(1e-15));

    auto [xi1, eta1] = harmonic_pair(-2, 0.0, std::exp(1.0));
    CHECK(xi1 == Approx(1.0));
    CHECK(eta1 == Approx(kPi / 2));

    for (auto [x, y] : {std::pair{0.3, -1.2}, {2.0, 0.5}, {-0.7, 0.1}}) {
        auto [xi, eta] = harmonic_pair(0, x, y);
        CHECK(xi == Approx(x));
        CHECK(eta == Approx(y));
    }
}

TEST_CASE("harmonic pair rejects the log singularity") {
    CHECK_THROWS_AS(harmonic_pair(-2, 0.0, 0.0), std::domain_error);
}

TEST_CASE("harmonic pair satisfies the Cauchy-Riemann equations") {
    const double h = 1e-3;
    for (int family : {-2, 0, 1}) {
        for (double x = -2.0; x <= 2.0; x += 0.25) {
            for (double y = -2.0; y <= 2.0; y += 0.25) {
                if (std::hypot(x, y) < 0.3) continue;
                if (x < 0.0 && std::fabs(y) < 0.3) continue;  // principal branch cut
                auto [xr, er] = harmonic_pair(family, x + h, y);
                auto [xl, el] = harmonic_pair(family, x - h, y);
                auto [xu, eu] = harmonic_pair(family, x, y + h);
                auto [xd, ed] = harmonic_pair(family, x, y - h);
                double dxi_dx = (xr - xl) / (2 * h);
                double dxi_dy = (xu - xd) / (2 * h);
                double deta_dx = (er - el) / (2 * h);
                double deta_dy = (eu - ed) / (2 * h);
                REQUIRE(std::fabs(dxi_dx - deta_dy) < 1e-4);
                REQUIRE(std::fabs(dxi_dy + deta_dx) < 1e-4);
            }
        }
    }
}

TEST_CASE("spiral frequency keeps the member angle exact") {
    SECTION("circles") {
        auto f = spiral_frequency(9.2, 0.0);
        CHECK(f.radial == Approx(9.2));
        CHECK(f.tangential == 0.0);
    }
    SECTION("pure radial member") {
        auto f = spiral_frequency(9.2, kPi / 2);
        CHECK(f.tangential == Approx(9.0));
        CHECK(std::atan2(f.tangential, f.radial) == Approx(kPi / 2));
    }
    SECTION("intermediate members") {
        for (double phi : {0.3, kPi / 4, 1.2, 2.0}) {
            auto f = spiral_frequency(9.2, phi);
            CHECK(f.tangential == std::round(f.tangential));
            CHECK(f.tangential >= 1.0);
            CHECK(std::atan2(f.tangential, f.radial) == Approx(phi).epsilon(1e-12));
        }
    }
}

TEST_CASE("pattern spec validation") {
    CHECK(PatternSpec::canonical_phi(kPi / 4 + kPi) == Approx(kPi / 4));
    CHECK(PatternSpec::canonical_phi(-0.5) == Approx(kPi - 0.5));
    CHECK(PatternSpec::min_patch_size(10.0) == 81);

    CHECK_THROWS_AS(PatternSpec::make(-2, 0.0, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(PatternSpec::make(-2, 0.0, 10.0, 80), std::invalid_argument);
    CHECK_THROWS_AS(PatternSpec::make(-2, 0.0, 10.0, 41), std::invalid_argument);
    CHECK(PatternSpec::make(-2, 0.0, 10.0).patch_size == 81);
}

TEST_CASE("render is deterministic and normalized") {
    auto spec = PatternSpec::make(-2, 0.7, 10.0);
    GrayImage a = render_pattern(spec);
    GrayImage b = render_pattern(spec);
    CHECK(a.samples == b.samples);
    float lo = 1.0f, hi = 0.0f;
    for (float v : a.samples) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= 0.0f);
    CHECK(hi == Approx(1.0f));
}

TEST_CASE("concentric circles are rotation invariant") {
    auto spec = PatternSpec::make(-2, 0.0, 10.0);
    GrayImage img = render_pattern(spec);
    SECTION("quarter turn is exact") {
        GrayImage turned = rotate_quarter(img, 1);
        for (size_t i = 0; i < img.samples.size(); ++i)
            REQUIRE(turned.samples[i] == Approx(img.samples[i]).margin(1e-6));
    }
    SECTION("arbitrary angle within interpolation error") {
        GrayImage turned = warp_about_center(img, 37.0 * kPi / 180.0, 1.0, img.width, 0.0f);
        CHECK(annulus_rms(img, turned, 5.0, 2 * spec.extent_sigma) < 0.02);
    }
}

TEST_CASE("spiral render matches itself at its arm symmetry angle") {
    auto spec = PatternSpec::make(-2, kPi / 4, 10.0);
    auto freq = spiral_frequency(spec.frequency, spec.phi);
    GrayImage img = render_pattern(spec);
    double step = 2.0 * kPi / freq.tangential;
    GrayImage turned = warp_about_center(img, step, 1.0, img.width, 0.0f);
    CHECK(annulus_rms(img, turned, 5.0, 2 * spec.extent_sigma) < 0.02);
}

TEST_CASE("renders at different extents are exact zooms of each other") {
    GrayImage base = render_pattern(PatternSpec::make(-2, kPi / 4, 10.0));
    SECTION("doubled extent, shrunk onto the base frame") {
        GrayImage big = render_pattern(PatternSpec::make(-2, kPi / 4, 20.0));
        GrayImage shrunk = warp_about_center(big, 0.0, 2.0, base.width, 0.0f);
        CHECK(annulus_ratio_rms(base, shrunk, 1.0, 20.0) < 1e-3);
    }
    SECTION("base shrunk onto a halved-extent frame") {
        GrayImage small = render_pattern(PatternSpec::make(-2, kPi / 4, 5.0));
        GrayImage shrunk = warp_about_center(base, 0.0, 2.0, small.width, 0.0f);
        CHECK(annulus_ratio_rms(small, shrunk, 1.0, 10.0) < 1e-3);
    }
}

TEST_CASE("phi is periodic with period pi") {
    GrayImage a = render_pattern(PatternSpec::make(-2, 0.9, 8.0));
    GrayImage b = render_pattern(PatternSpec::make(-2, 0.9 + kPi, 8.0));
    CHECK(a.samples == b.samples);
}

TEST_CASE("lines family renders parallel iso-curves") {
    GrayImage img = render_pattern(PatternSpec::make(0, 0.0, 10.0));
    CHECK(ratio_fit_residual(img, 40, 30, 20, 60) < 1e-4);
    CHECK(ratio_fit_residual(img, 40, 48, 20, 60) < 1e-4);
}

TEST_CASE("log family center pixel is in-painted") {
    GrayImage img = render_pattern(PatternSpec::make(-2, 0.3, 10.0));
    int c = img.width / 2;
    float acc = 0.0f;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
            if (dx != 0 || dy != 0) acc += img.at(c + dx, c + dy);
    CHECK(img.at(c, c) == Approx(acc / 8.0f));
}

TEST_CASE("stamping touches only the envelope disk") {
    GrayImage sheet(120, 120, 1.0f);
    stamp_spiral(sheet, {60.0, 60.0}, 8.0, 0.5, 9.2);
    bool ink = false;
    for (int y = 0; y < 120; ++y)
        for (int x = 0; x < 120; ++x) {
            double d = std::hypot(x - 60.0, y - 60.0);
            if (d > 4.0 * 8.0)
                REQUIRE(sheet.at(x, y) == 1.0f);
            else if (sheet.at(x, y) < 0.5f)
                ink = true;
        }
    CHECK(ink);
}
