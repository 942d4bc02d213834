#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "spiralquiz/codec.hpp"
#include "spiralquiz/convolve.hpp"
#include "spiralquiz/image.hpp"
#include "spiralquiz/layout.hpp"
#include "spiralquiz/pattern.hpp"
#include "spiralquiz/symmetry.hpp"

namespace spiralquiz {

struct AlignmentError : std::runtime_error {
    double residual;
    explicit AlignmentError(const std::string& msg, double residual_px = 0.0)
        : std::runtime_error(msg), residual(residual_px) {}
};

struct DecodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Corner-fit residual above this gate routes a sheet to manual review.
inline constexpr double kMaxResidualPx = 3.0;

struct RectifiedSheet {
    GrayImage image;                // canonical frame at layout dpi
    SimilarityTransform transform;  // scan px -> layout px
    std::array<SpiralDetection, 4> corner_detections{};  // tl, tr, bl, br, scan px
    std::vector<SpiralDetection> detections;             // all accepted peaks, scan px
    double residual = 0.0;          // RMS corner fit error, layout px
};

/// Order four corner detections as tl, tr, bl, br. The concentric-circle
/// anchor names tl; the farthest detection is br; the remaining pair is
/// split by the sign of the cross product (y grows downward).
inline std::array<SpiralDetection, 4> resolve_orientation(
    const std::vector<SpiralDetection>& detections) {
    if (detections.size() != 4)
        throw std::invalid_argument("resolve_orientation expects exactly 4 detections");
    int tl_index = -1;
    for (int i = 0; i < 4; ++i) {
        if (classify_symbol(detections[i].group_angle).symbol == 0) {
            if (tl_index >= 0)
                throw AlignmentError("more than one orientation anchor among corner spirals");
            tl_index = i;
        }
    }
    if (tl_index < 0) throw AlignmentError("no orientation anchor among corner spirals");

    const auto& tl = detections[tl_index];
    auto dist = [](const SpiralDetection& a, const SpiralDetection& b) {
        return std::hypot(a.center_x - b.center_x, a.center_y - b.center_y);
    };
    std::array<int, 3> rest{};
    int n = 0;
    for (int i = 0; i < 4; ++i)
        if (i != tl_index) rest[n++] = i;
    std::sort(rest.begin(), rest.end(), [&](int a, int b) {
        return dist(detections[a], tl) < dist(detections[b], tl);
    });
    int br_index = rest[2];
    int a_index = rest[0], b_index = rest[1];
    const auto& A = detections[a_index];
    const auto& B = detections[b_index];
    double cross = (A.center_x - tl.center_x) * (B.center_y - tl.center_y) -
                   (A.center_y - tl.center_y) * (B.center_x - tl.center_x);
    int tr_index = cross > 0.0 ? a_index : b_index;
    int bl_index = cross > 0.0 ? b_index : a_index;

    std::array<SpiralDetection, 4> ordered = {detections[tl_index], detections[tr_index],
                                              detections[bl_index], detections[br_index]};
    double top = dist(ordered[0], ordered[1]), bottom = dist(ordered[2], ordered[3]);
    double left = dist(ordered[0], ordered[2]), right = dist(ordered[1], ordered[3]);
    double eps = 1e-6;
    if (top < eps || bottom < eps || left < eps || right < eps)
        throw AlignmentError("degenerate corner geometry");
    if (std::fabs(top - bottom) > 0.25 * std::max(top, bottom) ||
        std::fabs(left - right) > 0.25 * std::max(left, right))
        throw AlignmentError("corner detections do not form a rectangle");
    double aspect = (0.5 * (top + bottom)) / (0.5 * (left + right));
    if (aspect < 0.5 || aspect > 2.0)
        throw AlignmentError("corner rectangle aspect out of bounds");
    return ordered;
}

struct TransformFit {
    SimilarityTransform transform;
    double residual = 0.0;  // RMS over the four corners, layout px
};

/// Closed-form least-squares similarity from detected corners to the
/// layout's corner anchors (two-point-set Procrustes on complex numbers).
inline TransformFit estimate_transform(const std::array<SpiralDetection, 4>& corners,
                                       const SheetLayout& layout) {
    using cd = std::complex<double>;
    std::array<cd, 4> a, b;
    for (int i = 0; i < 4; ++i) {
        a[i] = {corners[i].center_x, corners[i].center_y};
        Vec2 p = layout_to_px(layout, layout.corner_anchors[i]);
        b[i] = {p.x, p.y};
    }
    cd ma = (a[0] + a[1] + a[2] + a[3]) / 4.0;
    cd mb = (b[0] + b[1] + b[2] + b[3]) / 4.0;
    cd num = 0.0;
    double den = 0.0;
    for (int i = 0; i < 4; ++i) {
        num += (b[i] - mb) * std::conj(a[i] - ma);
        den += std::norm(a[i] - ma);
    }
    if (den < 1e-12) throw AlignmentError("degenerate corner geometry");
    cd w = num / den;
    if (std::abs(w) < 1e-12) throw AlignmentError("degenerate corner geometry");
    cd t = mb - w * ma;
    SimilarityTransform T;
    T.rotation = std::arg(w);
    T.scale = std::abs(w);
    T.translation = {t.real(), t.imag()};
    double ss = 0.0;
    for (int i = 0; i < 4; ++i) ss += std::norm(b[i] - (w * a[i] + t));
    double residual = std::sqrt(ss / 4.0);
    if (residual > kMaxResidualPx)
        throw AlignmentError("corner alignment residual " + std::to_string(residual) +
                                 " px exceeds gate",
                             residual);
    return {T, residual};
}

/// Minimum spiral_match_score for a candidate to survive sheet detection.
/// Pattern members on heavily degraded scans stay above 0.55 once their
/// center is refined; marked answer boxes, digits and body text stay below
/// 0.15 whichever symbol template they are tried against.
inline constexpr double kMinSpiralMatch = 0.35;

namespace detail {

/// Coarse-to-fine spiral detection for whole sheets. Peaks on a 2x-decimated
/// image seed the search; the seed list is deliberately generous and ungated,
/// because filled answer boxes can outrank the fiducials in raw symmetry
/// magnitude. Each seed is then center-refined against the ink model and kept
/// only when the refined neighbourhood actually fits it. That test separates
/// members from box blobs, which the double-angle coherence measure alone
/// cannot do.
inline std::vector<SpiralDetection> detect_spirals_pyramid(const GrayImage& scan, double sigma1,
                                                           double sigma2, int max_count,
                                                           double min_ratio, double extent_px,
                                                           double frequency) {
    const int d = 2;
    GrayImage coarse = decimate(scan, d);
    const int side_c = kernel_side(sigma1);
    if (coarse.width < side_c || coarse.height < side_c)
        return detect_spirals(scan, sigma1, sigma2, max_count, min_ratio);
    ComplexImage h_coarse = orientation_tensor(coarse, sigma1);
    ComplexImage i20_coarse = i20_response(h_coarse, -2, sigma2 / d);
    const int seed_budget = std::max(64, max_count);
    std::vector<SpiralDetection> seeds =
        pick_peaks(i20_coarse, sigma2 / d, seed_budget, min_ratio);
    if (seeds.empty()) return {};

    ComplexImage h = orientation_tensor(scan, sigma1);
    SymmetryFilter filt = make_filter(-2, sigma2);
    const SpiralAlphabet alphabet = SpiralAlphabet::standard();
    // Mapped seeds can sit 2-3 px off; a small full-resolution |I20| window
    // first pulls each one to within about a pixel, inside the capture basin
    // of the model-fit refinement.
    const int radius = 3;
    std::vector<SpiralDetection> validated;
    for (const auto& seed : seeds) {
        int cx = static_cast<int>(std::lround(seed.center_x * d + (d - 1) * 0.5));
        int cy = static_cast<int>(std::lround(seed.center_y * d + (d - 1) * 0.5));
        cx = std::clamp(cx, 0, scan.width - 1);
        cy = std::clamp(cy, 0, scan.height - 1);
        ComplexImage win = i20_window(h, filt, cx, cy, radius);
        int best_x = radius, best_y = radius;
        double best = -1.0;
        for (int y = 0; y < win.height; ++y)
            for (int x = 0; x < win.width; ++x) {
                double m = std::norm(win.at(x, y));
                if (m > best) {
                    best = m;
                    best_x = x;
                    best_y = y;
                }
            }
        double sx = cx + best_x - radius, sy = cy + best_y - radius;
        double phi = alphabet.symbols[classify_symbol(std::arg(win.at(best_x, best_y))).symbol];
        Vec2 refined = refine_spiral_center(scan, {sx, sy}, extent_px, phi, frequency);
        if (spiral_match_score(scan, refined, extent_px, phi, frequency) < kMinSpiralMatch)
            continue;
        int rx = std::clamp(static_cast<int>(std::lround(refined.x)), 0, scan.width - 1);
        int ry = std::clamp(static_cast<int>(std::lround(refined.y)), 0, scan.height - 1);
        std::complex<double> z = i20_window(h, filt, rx, ry, 0).at(0, 0);
        SpiralDetection det;
        det.center_x = refined.x;
        det.center_y = refined.y;
        det.magnitude = std::abs(z);
        det.group_angle = std::arg(z);
        det.decoded_phi = reduce_phi(det.group_angle);
        validated.push_back(det);
    }
    std::sort(validated.begin(), validated.end(),
              [](const SpiralDetection& a, const SpiralDetection& b) {
                  return a.magnitude > b.magnitude;
              });
    const double nms2 = 4.0 * sigma2 * sigma2;
    std::vector<SpiralDetection> out;
    for (const auto& det : validated) {
        if (static_cast<int>(out.size()) >= max_count) break;
        bool keep = true;
        for (const auto& kept : out) {
            double dx = det.center_x - kept.center_x, dy = det.center_y - kept.center_y;
            if (dx * dx + dy * dy < nms2) {
                keep = false;
                break;
            }
        }
        if (keep) out.push_back(det);
    }
    return out;
}

}  // namespace detail

/// Align a scanned sheet into the canonical layout frame. Corner candidates
/// are the detections nearest the four image corners.
inline RectifiedSheet rectify(const GrayImage& scan, const SheetLayout& layout) {
    const double extent_px = layout.spiral_extent * pixels_per_unit(layout);
    const double sigma2 = 0.8 * extent_px;
    std::vector<SpiralDetection> dets =
        detail::detect_spirals_pyramid(scan, 1.0, sigma2, 12, 3.0, extent_px, layout.frequency);
    if (dets.size() < 4)
        throw AlignmentError("found only " + std::to_string(dets.size()) + " spiral candidates");

    std::array<int, 4> picked{-1, -1, -1, -1};
    const double cx[4] = {0.0, static_cast<double>(scan.width - 1), 0.0,
                          static_cast<double>(scan.width - 1)};
    const double cy[4] = {0.0, 0.0, static_cast<double>(scan.height - 1),
                          static_cast<double>(scan.height - 1)};
    for (int c = 0; c < 4; ++c) {
        double best = 0.0;
        for (int i = 0; i < static_cast<int>(dets.size()); ++i) {
            double dx = dets[i].center_x - cx[c], dy = dets[i].center_y - cy[c];
            double dd = dx * dx + dy * dy;
            if (picked[c] < 0 || dd < best) {
                picked[c] = i;
                best = dd;
            }
        }
    }
    std::array<int, 4> sorted = picked;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw AlignmentError("corner candidates are not four distinct detections");

    std::vector<SpiralDetection> corner_cands;
    for (int c = 0; c < 4; ++c) corner_cands.push_back(dets[picked[c]]);
    std::array<SpiralDetection, 4> ordered = resolve_orientation(corner_cands);
    TransformFit fit = estimate_transform(ordered, layout);

    RectifiedSheet out;
    out.transform = fit.transform;
    out.residual = fit.residual;
    out.corner_detections = ordered;
    out.detections = std::move(dets);
    out.image = warp_similarity(scan, fit.transform.inverse(), sheet_width_px(layout),
                                sheet_height_px(layout));
    return out;
}

struct SheetIdentity {
    QuizCode quiz;
    StudentCode student;
    std::vector<std::string> flags;
};

/// Read the quiz and student codes from an aligned sheet by matching its
/// detections to the layout's eight anchor positions.
inline SheetIdentity decode_identity(const RectifiedSheet& sheet, const SheetLayout& layout) {
    const double extent_px = layout.spiral_extent * pixels_per_unit(layout);
    const double tol = 3.0 * extent_px;
    std::vector<Vec2> anchors;
    for (const auto& a : layout.corner_anchors) anchors.push_back(layout_to_px(layout, a));
    for (const auto& a : layout.bottom_anchors) anchors.push_back(layout_to_px(layout, a));

    std::array<const SpiralDetection*, 8> matched{};
    for (int i = 0; i < 8; ++i) {
        double best = tol * tol;
        for (const auto& det : sheet.detections) {
            Vec2 p = sheet.transform.apply({det.center_x, det.center_y});
            double dx = p.x - anchors[i].x, dy = p.y - anchors[i].y;
            double dd = dx * dx + dy * dy;
            if (dd <= best) {
                best = dd;
                matched[i] = &det;
            }
        }
        if (!matched[i])
            throw DecodeError("no spiral detection near anchor " + std::to_string(i));
    }

    std::array<SymbolDecision, 8> symbols{};
    SheetIdentity id;
    for (int i = 0; i < 8; ++i) {
        symbols[i] = classify_symbol(matched[i]->group_angle);
        if (symbols[i].margin < kLowConfidenceMargin &&
            (id.flags.empty() || id.flags.back() != "low_confidence_symbol"))
            id.flags.push_back("low_confidence_symbol");
    }
    if (symbols[0].symbol != 0)
        throw DecodeError("top-left anchor does not read as the orientation symbol");
    for (int i = 1; i < 4; ++i)
        if (symbols[i].symbol == 0)
            throw DecodeError("reserved symbol decoded in a quiz-code corner");
    id.quiz = {symbols[1].symbol, symbols[2].symbol, symbols[3].symbol};
    id.student = {symbols[4].symbol, symbols[5].symbol, symbols[6].symbol, symbols[7].symbol};
    if (sheet.residual > 1.5) id.flags.push_back("high_residual");
    return id;
}

}  // namespace spiralquiz
