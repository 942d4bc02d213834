#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <spiralquiz/codec.hpp>
#include <spiralquiz/pattern.hpp>
#include <spiralquiz/symmetry.hpp>

#include "helpers.hpp"

using namespace spiralquiz;
using Catch::Approx;

namespace {
constexpr double kPi = std::numbers::pi;

ComplexImage random_complex(int w, int h, uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ComplexImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.set(x, y, {u(rng), u(rng)});
    return img;
}

double max_abs(const ComplexImage& img) {
    double m = 0.0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) m = std::max(m, std::abs(img.at(x, y)));
    return m;
}
}  // namespace

TEST_CASE("filter kernel geometry") {
    CHECK(make_filter(0, 2.0).kernel.width == 17);
    CHECK(make_filter(-2, 0.8).kernel.width == 9);
    CHECK_THROWS_AS(make_filter(-2, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_filter(-2, -1.0), std::invalid_argument);
}

TEST_CASE("order zero filter is the unit-integral Gaussian") {
    SymmetryFilter f = make_filter(0, 2.0);
    std::complex<double> sum = 0.0;
    for (int y = 0; y < f.kernel.height; ++y)
        for (int x = 0; x < f.kernel.width; ++x) {
            REQUIRE(f.kernel.at(x, y).imag() == 0.0);
            sum += f.kernel.at(x, y);
        }
    CHECK(sum.real() == Approx(1.0).margin(1e-4));
}

TEST_CASE("first order filter vanishes at the center") {
    SymmetryFilter f = make_filter(1, 2.0);
    int c = f.kernel.width / 2;
    CHECK(std::abs(f.kernel.at(c, c)) == 0.0);
}

TEST_CASE("even order kernels are point symmetric") {
    SymmetryFilter f = make_filter(-2, 4.0);
    int side = f.kernel.width, c = side / 2;
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            auto a = f.kernel.at(x, y);
            auto b = f.kernel.at(2 * c - x, 2 * c - y);
            REQUIRE(std::abs(a - b) < 1e-15);
        }
}

TEST_CASE("orientation tensor of a constant image is zero") {
    GrayImage flat(32, 32, 0.6f);
    ComplexImage h = orientation_tensor(flat, 1.0);
    CHECK(max_abs(h) < 1e-9);
}

TEST_CASE("orientation tensor doubles the local orientation") {
    SECTION("vertical stripes give angle zero") {
        GrayImage img(81, 81, 0.0f);
        for (int y = 0; y < 81; ++y)
            for (int x = 0; x < 81; ++x)
                img.at(x, y) = 0.5f + 0.5f * static_cast<float>(std::cos(0.7 * x));
        ComplexImage h = orientation_tensor(img, 1.0);
        double peak = max_abs(h);
        for (int y = 8; y < img.height - 8; ++y)
            for (int x = 8; x < img.width - 8; ++x) {
                auto v = h.at(x, y);
                if (std::abs(v) < 0.3 * peak) continue;
                REQUIRE(detail::angle_distance(std::arg(v), 0.0) < 0.02);
            }
    }
    SECTION("concentric circles give twice the polar angle") {
        GrayImage img = render_pattern(PatternSpec::make(-2, 0.0, 10.0));
        ComplexImage h = orientation_tensor(img, 1.0);
        double peak = max_abs(h);
        double c = (img.width - 1) / 2.0;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double dx = x - c, dy = y - c;
                double r = std::hypot(dx, dy);
                if (r < 5.0 || r > 15.0) continue;
                auto v = h.at(x, y);
                if (std::abs(v) < 0.2 * peak) continue;
                REQUIRE(detail::angle_distance(std::arg(v), 2.0 * std::atan2(dy, dx)) < 0.25);
            }
    }
}

TEST_CASE("response to a zero field is zero") {
    ComplexImage h(21, 21);
    ComplexImage r = i20_response(h, -2, 2.0);
    CHECK(max_abs(r) == 0.0);
}

TEST_CASE("response peak localizes and identifies a rendered spiral") {
    GrayImage img = render_pattern(PatternSpec::make(-2, 0.4, 10.0));
    auto dets = detect_spirals(img, 1.0, 8.0, 1, 3.0);
    REQUIRE(dets.size() == 1);
    double c = (img.width - 1) / 2.0;
    CHECK(std::hypot(dets[0].center_x - c, dets[0].center_y - c) < 0.5);
    CHECK(detail::angle_distance(dets[0].group_angle, 0.8) < 0.05);
    CHECK(dets[0].decoded_phi == Approx(0.4).margin(0.05));
}

TEST_CASE("response is linear in the tensor field") {
    ComplexImage h = random_complex(41, 41, 7u);
    ComplexImage base = i20_response(h, -2, 3.0);

    SECTION("scalar multiples") {
        ComplexImage h2 = h;
        for (auto& v : h2.re) v *= 2.5;
        for (auto& v : h2.im) v *= 2.5;
        ComplexImage r2 = i20_response(h2, -2, 3.0);
        double ref = max_abs(base) * 2.5;
        for (int y = 0; y < r2.height; ++y)
            for (int x = 0; x < r2.width; ++x)
                REQUIRE(std::abs(r2.at(x, y) - 2.5 * base.at(x, y)) < 1e-12 * ref);
    }
    SECTION("sums") {
        ComplexImage g = random_complex(41, 41, 8u);
        ComplexImage hg(41, 41);
        for (size_t i = 0; i < hg.re.size(); ++i) {
            hg.re[i] = h.re[i] + g.re[i];
            hg.im[i] = h.im[i] + g.im[i];
        }
        ComplexImage rg = i20_response(g, -2, 3.0);
        ComplexImage rhg = i20_response(hg, -2, 3.0);
        double ref = max_abs(rhg);
        for (int y = 0; y < rhg.height; ++y)
            for (int x = 0; x < rhg.width; ++x)
                REQUIRE(std::abs(rhg.at(x, y) - base.at(x, y) - rg.at(x, y)) < 1e-12 * ref);
    }
}

TEST_CASE("separable response matches direct kernel correlation") {
    ComplexImage h = random_complex(41, 41, 9u);
    ComplexImage fast = i20_response(h, -2, 2.5);
    SymmetryFilter filt = make_filter(-2, 2.5);
    ComplexImage direct = detail::i20_window(h, filt, 20, 20, 20);
    REQUIRE(direct.width == fast.width);
    double ref = max_abs(fast);
    for (int y = 0; y < fast.height; ++y)
        for (int x = 0; x < fast.width; ++x)
            REQUIRE(std::abs(fast.at(x, y) - direct.at(x, y)) < 1e-9 * ref);
}

TEST_CASE("blank image yields no detections") {
    GrayImage white(64, 64, 1.0f);
    CHECK(detect_spirals(white, 1.0, 5.0, 4, 3.0).empty());
}

TEST_CASE("detector argument guards") {
    GrayImage img(32, 32, 1.0f);
    CHECK_THROWS_AS(detect_spirals(img, 1.0, 3.0, 0, 3.0), std::invalid_argument);
    CHECK_THROWS_AS(detect_spirals(img, 1.0, 3.0, 4, 1.0), std::invalid_argument);
}

TEST_CASE("detector separates and ranks multiple spirals") {
    GrayImage sheet(129, 193, 1.0f);
    stamp_spiral(sheet, {40.0, 60.0}, 8.0, kPi / 6, 9.2);
    stamp_spiral(sheet, {88.0, 130.0}, 8.0, kPi / 2, 9.2);
    auto dets = detect_spirals(sheet, 1.0, 6.4, 4, 3.0);
    REQUIRE(dets.size() == 2);
    CHECK(dets[0].magnitude >= dets[1].magnitude);
    for (const auto& d : dets) {
        bool first = std::hypot(d.center_x - 40.0, d.center_y - 60.0) < 0.5;
        bool second = std::hypot(d.center_x - 88.0, d.center_y - 130.0) < 0.5;
        REQUIRE((first || second));
        double want = first ? kPi / 6 : kPi / 2;
        REQUIRE(std::fabs(d.decoded_phi - want) < 0.05);
    }
    CHECK(detect_spirals(sheet, 1.0, 6.4, 1, 3.0).size() == 1);
}

TEST_CASE("detection recovers sub-pixel positions") {
    GrayImage patch = testutil::spiral_patch(kPi / 3, 10.0, 0.3, -0.2);
    auto dets = detect_spirals(patch, 1.0, 8.0, 1, 3.0);
    REQUIRE(dets.size() == 1);
    double c = testutil::patch_center(patch);
    CHECK(std::fabs(dets[0].center_x - (c + 0.3)) < 0.5);
    CHECK(std::fabs(dets[0].center_y - (c - 0.2)) < 0.5);

    Vec2 fine = refine_spiral_center(patch, {dets[0].center_x, dets[0].center_y}, 10.0,
                                     dets[0].decoded_phi);
    CHECK(std::hypot(fine.x - (c + 0.3), fine.y - (c - 0.2)) < 0.1);
}

TEST_CASE("ink-model score separates members from solid blobs") {
    // A filled square produces a strong double-angle peak, so magnitude and
    // coherence alone cannot reject it; the model fit can.
    GrayImage square(97, 97, 1.0f);
    for (int y = 38; y < 59; ++y)
        for (int x = 38; x < 59; ++x) square.at(x, y) = 0.1f;
    GrayImage patch = testutil::spiral_patch(kPi / 4, 10.0);
    double c = testutil::patch_center(patch);
    double blob = spiral_match_score(square, {48.0, 48.0}, 10.0, kPi / 4);
    double member = spiral_match_score(patch, {c, c}, 10.0, kPi / 4);
    CHECK(blob < 0.05);
    CHECK(member > 0.9);
}

TEST_CASE("decoded member angle is rotation invariant") {
    GrayImage patch = testutil::spiral_patch(kPi / 4, 10.0);
    for (double deg : {25.0, 90.0, 161.0}) {
        SimilarityTransform m;
        m.rotation = deg * kPi / 180.0;
        double c = testutil::patch_center(patch);
        Vec2 rc = m.apply({c, c});
        m.translation = {c - rc.x, c - rc.y};
        GrayImage turned = warp_similarity(patch, m, patch.width, patch.height, 1.0f);
        auto dets = detect_spirals(turned, 1.0, 8.0, 1, 3.0);
        REQUIRE(dets.size() == 1);
        REQUIRE(detail::angle_distance(2.0 * dets[0].decoded_phi, 2.0 * (kPi / 4)) <
                2.0 * (kPi / 24));
    }
}

TEST_CASE("decoding survives scale changes with a fixed filter") {
    const double phi = 2.0 * kPi / 6;  // symbol 2
    GrayImage patch = testutil::spiral_patch(phi, 10.0, 0.0, 0.0, 121);
    double c = testutil::patch_center(patch);
    for (double s : {0.7, 1.0, 1.4}) {
        SimilarityTransform m;  // output px -> source px
        m.scale = 1.0 / s;
        Vec2 rc = m.apply({c, c});
        m.translation = {c - rc.x, c - rc.y};
        GrayImage zoomed = warp_similarity(patch, m, patch.width, patch.height, 1.0f);
        auto dets = detect_spirals(zoomed, 1.0, 8.0, 1, 3.0);
        REQUIRE(dets.size() == 1);
        CHECK(std::hypot(dets[0].center_x - c, dets[0].center_y - c) < 1.0);
        CHECK(classify_symbol(dets[0].group_angle).symbol == 2);
    }
}

TEST_CASE("a 40 percent sector occlusion keeps the symbol readable") {
    GrayImage patch = testutil::spiral_patch(kPi / 6, 10.0);
    double c = testutil::patch_center(patch);
    std::mt19937 rng(21u);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    double dir = u(rng);
    for (int y = 0; y < patch.height; ++y)
        for (int x = 0; x < patch.width; ++x) {
            double d = std::remainder(std::atan2(y - c, x - c) - dir, 2.0 * kPi);
            if (std::fabs(d) <= 0.4 * kPi) patch.at(x, y) = 1.0f;
        }
    auto dets = detect_spirals(patch, 1.0, 8.0, 1, 3.0);
    REQUIRE(dets.size() == 1);
    int symbol = classify_symbol(dets[0].group_angle).symbol;
    CHECK(symbol == 1);
    Vec2 fine = refine_spiral_center(patch, {dets[0].center_x, dets[0].center_y}, 10.0,
                                     SpiralAlphabet::standard().symbols[symbol]);
    CHECK(std::hypot(fine.x - c, fine.y - c) < 1.0);
}
