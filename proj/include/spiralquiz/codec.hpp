#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace spiralquiz {

/// Six spiral members, equally spaced in chirality. Symbol 0 (concentric
/// circles) is reserved for the top-left orientation anchor.
struct SpiralAlphabet {
    std::vector<double> symbols;  // phi per symbol, [0, pi)

    static SpiralAlphabet standard() {
        SpiralAlphabet a;
        for (int k = 0; k < 6; ++k) a.symbols.push_back(k * std::numbers::pi / 6.0);
        return a;
    }
    int size() const { return static_cast<int>(symbols.size()); }
};

struct QuizCode {
    int corner_tr = 1;
    int corner_bl = 1;
    int corner_br = 1;
    bool operator==(const QuizCode&) const = default;
};

struct StudentCode {
    int s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    bool operator==(const StudentCode&) const = default;
};

inline QuizCode encode_quiz(int index) {
    if (index < 0 || index > 124) throw std::out_of_range("quiz index must be in 0..124");
    return {index / 25 + 1, (index / 5) % 5 + 1, index % 5 + 1};
}

inline int decode_quiz(const QuizCode& code) {
    for (int s : {code.corner_tr, code.corner_bl, code.corner_br}) {
        if (s == 0) throw std::invalid_argument("quiz code contains the reserved symbol 0");
        if (s < 1 || s > 5) throw std::invalid_argument("quiz code symbol out of range");
    }
    return (code.corner_tr - 1) * 25 + (code.corner_bl - 1) * 5 + (code.corner_br - 1);
}

inline StudentCode encode_student(int index) {
    if (index < 0 || index > 1295) throw std::out_of_range("student index must be in 0..1295");
    return {index / 216, (index / 36) % 6, (index / 6) % 6, index % 6};
}

inline int decode_student(const StudentCode& code) {
    for (int s : {code.s1, code.s2, code.s3, code.s4})
        if (s < 0 || s > 5) throw std::invalid_argument("student code symbol out of range");
    return code.s1 * 216 + code.s2 * 36 + code.s3 * 6 + code.s4;
}

/// Below this margin a classification counts as low-confidence.
inline constexpr double kLowConfidenceMargin = std::numbers::pi / 36.0;

struct SymbolDecision {
    int symbol = 0;
    double margin = 0.0;  // angular distance to the nearest decision boundary
};

namespace detail {

inline double angle_distance(double a, double b) {
    double d = std::fmod(a - b, 2.0 * std::numbers::pi);
    if (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
    if (d < -std::numbers::pi) d += 2.0 * std::numbers::pi;
    return std::fabs(d);
}

}  // namespace detail

/// Nearest symbol to a measured group angle (arg I20 = 2*phi). Distances are
/// taken on the doubled-angle circle; exact ties go to the lower index.
inline SymbolDecision classify_symbol(double group_angle,
                                      const SpiralAlphabet& alphabet = SpiralAlphabet::standard()) {
    if (alphabet.size() < 2) throw std::invalid_argument("alphabet needs at least 2 symbols");
    int best_k = 0;
    double best = detail::angle_distance(group_angle, 2.0 * alphabet.symbols[0]);
    for (int k = 1; k < alphabet.size(); ++k) {
        double d = detail::angle_distance(group_angle, 2.0 * alphabet.symbols[k]);
        if (d < best) {
            best = d;
            best_k = k;
        }
    }
    double second = std::numeric_limits<double>::infinity();
    for (int k = 0; k < alphabet.size(); ++k) {
        if (k == best_k) continue;
        second = std::min(second, detail::angle_distance(group_angle, 2.0 * alphabet.symbols[k]));
    }
    return {best_k, 0.5 * (second - best)};
}

}  // namespace spiralquiz
