#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "spiralquiz/font.hpp"
#include "spiralquiz/image.hpp"
#include "spiralquiz/layout.hpp"
#include "spiralquiz/rectify.hpp"

namespace spiralquiz {

struct AnswerKey {
    int quiz_index = 0;
    std::array<int, 20> correct{};  // alternative 0..3 per question

    bool operator==(const AnswerKey&) const = default;
};

enum class MarkState { single, blank, multiple };
enum class Verdict { correct, incorrect, blank, multiple };

inline char verdict_code(Verdict v) {
    switch (v) {
        case Verdict::correct: return 'C';
        case Verdict::incorrect: return 'X';
        case Verdict::blank: return 'B';
        case Verdict::multiple: return 'M';
    }
    return '?';
}

struct MarkReading {
    int question = 1;
    std::array<double, 4> fill{};  // dark-pixel share per alternative
    MarkState state = MarkState::blank;
    int marked_alternative = -1;  // set when state == single

    /// Equality is over the discrete reading; raw fractions are measurement
    /// detail and may differ between scans of the same sheet.
    bool operator==(const MarkReading& o) const {
        return question == o.question && state == o.state &&
               marked_alternative == o.marked_alternative;
    }
};

struct GradeRecord {
    int student_index = 0;
    int quiz_index = 0;
    std::array<MarkReading, 20> readings{};
    std::array<Verdict, 20> verdicts{};
    int score = 0;
    std::vector<std::string> flags;

    bool operator==(const GradeRecord& o) const {
        return student_index == o.student_index && quiz_index == o.quiz_index &&
               readings == o.readings && verdicts == o.verdicts && score == o.score;
    }
};

/// Measure the fill state of all 80 boxes on an aligned sheet. The box
/// interior is eroded so the printed outline never counts as ink.
inline std::array<MarkReading, 20> read_answers(const RectifiedSheet& sheet,
                                                const SheetLayout& layout) {
    const GrayImage& img = sheet.image;
    std::array<MarkReading, 20> readings{};
    for (int q = 1; q <= 20; ++q) {
        MarkReading& r = readings[q - 1];
        r.question = q;
        int marked = 0, marked_alt = -1;
        for (int alt = 0; alt < 4; ++alt) {
            const BoxSpec* box = find_box(layout, q, alt);
            if (!box) throw std::invalid_argument("layout lacks box for question");
            detail::PxRect e = detail::eroded_box_px(layout, box->rect);
            long dark = 0, total = 0;
            for (int y = std::max(0, e.y0); y <= std::min(img.height - 1, e.y1); ++y)
                for (int x = std::max(0, e.x0); x <= std::min(img.width - 1, e.x1); ++x) {
                    ++total;
                    if (img.at(x, y) < layout.marking.darkness_cut) ++dark;
                }
            r.fill[alt] = total > 0 ? static_cast<double>(dark) / total : 0.0;
            if (r.fill[alt] >= layout.marking.fill_fraction) {
                ++marked;
                marked_alt = alt;
            }
        }
        if (marked == 1) {
            r.state = MarkState::single;
            r.marked_alternative = marked_alt;
        } else if (marked == 0) {
            r.state = MarkState::blank;
        } else {
            r.state = MarkState::multiple;
        }
    }
    return readings;
}

/// Score readings against the key. Blank and multiple marks never earn the
/// point.
inline GradeRecord grade(const std::array<MarkReading, 20>& readings, const AnswerKey& key,
                         int student_index, int quiz_index) {
    if (key.quiz_index != quiz_index)
        throw std::invalid_argument("answer key is for a different quiz");
    GradeRecord rec;
    rec.student_index = student_index;
    rec.quiz_index = quiz_index;
    rec.readings = readings;
    rec.score = 0;
    for (int q = 0; q < 20; ++q) {
        const MarkReading& r = readings[q];
        switch (r.state) {
            case MarkState::blank: rec.verdicts[q] = Verdict::blank; break;
            case MarkState::multiple: rec.verdicts[q] = Verdict::multiple; break;
            case MarkState::single:
                rec.verdicts[q] = (r.marked_alternative == key.correct[q]) ? Verdict::correct
                                                                           : Verdict::incorrect;
                break;
        }
        if (rec.verdicts[q] == Verdict::correct) ++rec.score;
    }
    return rec;
}

/// Assessment overlay: green outlines where the key says the answer is,
/// blue marks where the student answered, score written in the header.
inline ColorImage annotate(const RectifiedSheet& sheet, const SheetLayout& layout,
                           const GradeRecord& record, const AnswerKey& key) {
    if (key.quiz_index != record.quiz_index)
        throw std::invalid_argument("answer key is for a different quiz");
    ColorImage out = to_color(sheet.image);
    const double ppu = pixels_per_unit(layout);
    const int scale = std::max(1, static_cast<int>(std::lround(ppu * 0.0016)));

    auto outline = [&](detail::PxRect r, int thickness, uint8_t cr, uint8_t cg, uint8_t cb) {
        for (int t = 0; t < thickness; ++t) {
            int x0 = r.x0 - t, x1 = r.x1 + t, y0 = r.y0 - t, y1 = r.y1 + t;
            for (int x = std::max(0, x0); x <= std::min(out.width - 1, x1); ++x) {
                if (y0 >= 0 && y0 < out.height) out.set(x, y0, cr, cg, cb);
                if (y1 >= 0 && y1 < out.height) out.set(x, y1, cr, cg, cb);
            }
            for (int y = std::max(0, y0); y <= std::min(out.height - 1, y1); ++y) {
                if (x0 >= 0 && x0 < out.width) out.set(x0, y, cr, cg, cb);
                if (x1 >= 0 && x1 < out.width) out.set(x1, y, cr, cg, cb);
            }
        }
    };

    for (int q = 1; q <= 20; ++q) {
        const BoxSpec* correct_box = find_box(layout, q, key.correct[q - 1]);
        if (correct_box) outline(detail::rect_to_px(layout, correct_box->rect), 2, 0, 255, 0);
        const MarkReading& r = record.readings[q - 1];
        for (int alt = 0; alt < 4; ++alt) {
            if (r.fill[alt] < layout.marking.fill_fraction) continue;
            const BoxSpec* box = find_box(layout, q, alt);
            if (!box) continue;
            detail::PxRect b = detail::rect_to_px(layout, box->rect);
            int w = b.x1 - b.x0 + 1, h = b.y1 - b.y0 + 1;
            int mx = static_cast<int>(std::lround(w * 0.35));
            int my = static_cast<int>(std::lround(h * 0.35));
            for (int y = b.y0 + my; y <= b.y1 - my; ++y)
                for (int x = b.x0 + mx; x <= b.x1 - mx; ++x)
                    if (x >= 0 && x < out.width && y >= 0 && y < out.height)
                        out.set(x, y, 0, 0, 255);
        }
    }

    detail::PxRect sb = detail::rect_to_px(layout, layout.score_box);
    std::string text = std::to_string(record.score) + "/20";
    int tx = sb.x0 + text_width_px("SCORE: ", scale) + 4 * scale;
    int ty = (sb.y0 + sb.y1 + 1 - kGlyphHeight * scale) / 2;
    draw_text(out, tx, ty, text, scale, 0, 0, 255);
    return out;
}

}  // namespace spiralquiz
