#include <catch2/catch_amalgamated.hpp>

#include <numbers>
#include <set>
#include <stdexcept>

#include <spiralquiz/codec.hpp>

using namespace spiralquiz;
using Catch::Approx;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("standard alphabet spacing") {
    auto a = SpiralAlphabet::standard();
    REQUIRE(a.size() == 6);
    for (int k = 0; k < 6; ++k) CHECK(a.symbols[k] == Approx(k * kPi / 6.0));
}

TEST_CASE("quiz code known values") {
    CHECK(encode_quiz(0) == QuizCode{1, 1, 1});
    CHECK(encode_quiz(124) == QuizCode{5, 5, 5});
    CHECK(encode_quiz(37) == QuizCode{2, 3, 3});
    CHECK(decode_quiz({1, 1, 1}) == 0);
    CHECK(decode_quiz({5, 5, 5}) == 124);
}

TEST_CASE("quiz codes round-trip and never use the reserved symbol") {
    std::set<int> seen;
    for (int i = 0; i <= 124; ++i) {
        QuizCode c = encode_quiz(i);
        CHECK(c.corner_tr >= 1);
        CHECK(c.corner_bl >= 1);
        CHECK(c.corner_br >= 1);
        CHECK(c.corner_tr <= 5);
        CHECK(c.corner_bl <= 5);
        CHECK(c.corner_br <= 5);
        REQUIRE(decode_quiz(c) == i);
        seen.insert(c.corner_tr * 100 + c.corner_bl * 10 + c.corner_br);
    }
    CHECK(seen.size() == 125);
    CHECK_THROWS_AS(encode_quiz(-1), std::out_of_range);
    CHECK_THROWS_AS(encode_quiz(125), std::out_of_range);
    CHECK_THROWS(decode_quiz({0, 1, 1}));
    CHECK_THROWS(decode_quiz({1, 6, 1}));
}

TEST_CASE("student code known values and round-trip") {
    CHECK(encode_student(0) == StudentCode{0, 0, 0, 0});
    CHECK(encode_student(1295) == StudentCode{5, 5, 5, 5});
    for (int i = 0; i <= 1295; ++i) REQUIRE(decode_student(encode_student(i)) == i);
    CHECK_THROWS_AS(encode_student(1296), std::out_of_range);
    CHECK_THROWS_AS(encode_student(-1), std::out_of_range);
    CHECK_THROWS(decode_student({6, 0, 0, 0}));
}

TEST_CASE("symbol classification at exact and perturbed angles") {
    SECTION("exact center") {
        auto d = classify_symbol(0.0);
        CHECK(d.symbol == 0);
        CHECK(d.margin == Approx(kPi / 6.0));
    }
    SECTION("near a neighbor") {
        CHECK(classify_symbol(2.0 * (kPi / 6.0) + 0.05).symbol == 1);
    }
    SECTION("boundary ties go to the lower index") {
        auto d = classify_symbol(kPi / 6.0);
        CHECK(d.symbol == 0);
        CHECK(d.margin == Approx(0.0).margin(1e-12));
    }
    SECTION("wrap-around near the last symbol") {
        CHECK(classify_symbol(5.0 * kPi / 3.0 + 0.3).symbol == 5);
        CHECK(classify_symbol(-kPi / 3.0).symbol == 5);
    }
}

TEST_CASE("classification holds across the full noise margin") {
    for (int k = 0; k < 6; ++k) {
        double center = 2.0 * k * kPi / 6.0;
        for (double delta = -kPi / 6 + 0.01; delta <= kPi / 6 - 0.01; delta += 0.02) {
            auto d = classify_symbol(center + delta);
            REQUIRE(d.symbol == k);
            REQUIRE(d.margin == Approx(kPi / 6.0 - std::fabs(delta)).margin(1e-9));
        }
    }
}

TEST_CASE("margins below the confidence floor are detectable") {
    double offset = kPi / 6.0 - kLowConfidenceMargin / 2.0;
    CHECK(classify_symbol(offset).margin < kLowConfidenceMargin);
    CHECK(classify_symbol(0.1).margin > kLowConfidenceMargin);
}
