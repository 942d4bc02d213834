#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "spiralquiz/codec.hpp"
#include "spiralquiz/font.hpp"
#include "spiralquiz/image.hpp"
#include "spiralquiz/pattern.hpp"

namespace spiralquiz {

struct Rect {
    double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
    bool operator==(const Rect&) const = default;
};

struct BoxSpec {
    int question = 1;       // 1-based
    int alternative = 0;    // 0..3 = A..D
    Rect rect;
    bool operator==(const BoxSpec&) const = default;
};

struct TextField {
    std::string label;
    Rect rect;
    bool operator==(const TextField&) const = default;
};

struct MarkingParams {
    double fill_fraction = 0.15;  // share of dark interior pixels that counts as a mark
    double darkness_cut = 0.5;    // intensity below which a pixel counts as dark
    double box_erosion = 0.15;    // per-side interior inset, fraction of box size
    bool operator==(const MarkingParams&) const = default;
};

struct StudentRecord {
    int student_index = 0;  // 0..1295
    std::string name;
    std::string email;
    std::string person_id;
};

/// Sheet geometry in normalized units: the page is 1.0 wide, y grows
/// downward. Pixel geometry derives from dpi and the physical page width.
struct SheetLayout {
    int version = 1;
    double page_w = 1.0;
    double page_h = 1.4142135623730951;
    double width_mm = 210.0;
    int dpi = 150;
    double spiral_extent = 0.016;  // envelope std, normalized
    double frequency = 9.2;        // log-family ring-density constant
    std::array<Vec2, 4> corner_anchors{};  // tl, tr, bl, br
    std::array<Vec2, 4> bottom_anchors{};  // left to right
    std::vector<BoxSpec> boxes;
    std::vector<TextField> text_fields;
    Rect score_box;
    MarkingParams marking;
    bool operator==(const SheetLayout&) const = default;
};

inline double pixels_per_unit(const SheetLayout& l) { return l.dpi * l.width_mm / 25.4; }
inline int sheet_width_px(const SheetLayout& l) {
    return static_cast<int>(std::lround(l.page_w * pixels_per_unit(l)));
}
inline int sheet_height_px(const SheetLayout& l) {
    return static_cast<int>(std::lround(l.page_h * pixels_per_unit(l)));
}

/// Pixel centers sit on integer coordinates; unit u maps to pixel u*ppu - 0.5
/// so that a span of n units covers exactly n*ppu pixels.
inline Vec2 layout_to_px(const SheetLayout& l, Vec2 u) {
    double s = pixels_per_unit(l);
    return {u.x * s - 0.5, u.y * s - 0.5};
}
inline Vec2 px_to_layout(const SheetLayout& l, Vec2 p) {
    double s = pixels_per_unit(l);
    return {(p.x + 0.5) / s, (p.y + 0.5) / s};
}

namespace detail {

struct PxRect {
    int x0, y0, x1, y1;  // inclusive
};

inline PxRect rect_to_px(const SheetLayout& l, const Rect& r) {
    double s = pixels_per_unit(l);
    return {static_cast<int>(std::lround(r.x * s - 0.5)),
            static_cast<int>(std::lround(r.y * s - 0.5)),
            static_cast<int>(std::lround((r.x + r.w) * s - 0.5)) - 1,
            static_cast<int>(std::lround((r.y + r.h) * s - 0.5)) - 1};
}

/// Box interior after the configured per-side erosion; excludes the outline.
inline PxRect eroded_box_px(const SheetLayout& l, const Rect& r) {
    PxRect p = rect_to_px(l, r);
    int ex = static_cast<int>(std::lround((p.x1 - p.x0 + 1) * l.marking.box_erosion));
    int ey = static_cast<int>(std::lround((p.y1 - p.y0 + 1) * l.marking.box_erosion));
    return {p.x0 + ex, p.y0 + ey, p.x1 - ex, p.y1 - ey};
}

inline double point_rect_distance(Vec2 p, const Rect& r) {
    double dx = std::max({r.x - p.x, 0.0, p.x - (r.x + r.w)});
    double dy = std::max({r.y - p.y, 0.0, p.y - (r.y + r.h)});
    return std::hypot(dx, dy);
}

inline bool rects_overlap(const Rect& a, const Rect& b) {
    return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

}  // namespace detail

inline const BoxSpec* find_box(const SheetLayout& l, int question, int alternative) {
    for (const auto& b : l.boxes)
        if (b.question == question && b.alternative == alternative) return &b;
    return nullptr;
}

inline void validate_layout(const SheetLayout& l) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("layout: " + msg); };
    if (l.version != 1) fail("unsupported version");
    if (!(l.page_w > 0.0 && l.page_h > 0.0)) fail("page dimensions must be positive");
    if (!(l.width_mm > 0.0)) fail("physical width must be positive");
    if (l.dpi < 50) fail("dpi too low to resolve fiducials");
    if (!(l.spiral_extent > 0.0)) fail("spiral_extent must be positive");
    if (!(l.frequency > 0.0)) fail("frequency must be positive");
    if (!(l.marking.fill_fraction > 0.0 && l.marking.fill_fraction < 1.0 &&
          l.marking.darkness_cut > 0.0 && l.marking.darkness_cut < 1.0 &&
          l.marking.box_erosion >= 0.0 && l.marking.box_erosion < 0.5))
        fail("marking thresholds out of range");

    std::vector<Vec2> anchors(l.corner_anchors.begin(), l.corner_anchors.end());
    anchors.insert(anchors.end(), l.bottom_anchors.begin(), l.bottom_anchors.end());
    for (const auto& a : anchors)
        if (a.x < 0.0 || a.y < 0.0 || a.x > l.page_w || a.y > l.page_h)
            fail("anchor outside the page");
    for (size_t i = 0; i < anchors.size(); ++i)
        for (size_t j = i + 1; j < anchors.size(); ++j)
            if (norm(anchors[i] - anchors[j]) < 8.0 * l.spiral_extent)
                fail("anchors closer than their spiral supports");

    if (l.boxes.size() != 80) fail("expected 20 questions x 4 alternatives");
    std::vector<std::pair<int, int>> seen;
    for (const auto& b : l.boxes) {
        if (b.question < 1 || b.question > 20) fail("box question out of range");
        if (b.alternative < 0 || b.alternative > 3) fail("box alternative out of range");
        if (!(b.rect.w > 0.0 && b.rect.h > 0.0)) fail("box with empty extent");
        if (b.rect.x <= 0.0 || b.rect.y <= 0.0 || b.rect.x + b.rect.w >= l.page_w ||
            b.rect.y + b.rect.h >= l.page_h)
            fail("box not strictly inside the page");
        seen.emplace_back(b.question, b.alternative);
        for (const auto& a : anchors)
            if (detail::point_rect_distance(a, b.rect) < 3.0 * l.spiral_extent)
                fail("box too close to a spiral anchor");
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
        fail("duplicate (question, alternative) box");
    for (size_t i = 0; i < l.boxes.size(); ++i)
        for (size_t j = i + 1; j < l.boxes.size(); ++j)
            if (detail::rects_overlap(l.boxes[i].rect, l.boxes[j].rect)) fail("overlapping boxes");

    for (const auto& f : l.text_fields)
        if (f.rect.x < 0.0 || f.rect.y < 0.0 || f.rect.x + f.rect.w > l.page_w ||
            f.rect.y + f.rect.h > l.page_h)
            fail("text field outside the page");
}

inline SheetLayout default_layout(int dpi = 150) {
    SheetLayout l;
    l.dpi = dpi;
    const double m = 0.068;
    l.corner_anchors = {Vec2{m, m}, Vec2{l.page_w - m, m}, Vec2{m, l.page_h - m},
                        Vec2{l.page_w - m, l.page_h - m}};
    l.bottom_anchors = {Vec2{0.30, l.page_h - m}, Vec2{0.44, l.page_h - m},
                        Vec2{0.58, l.page_h - m}, Vec2{0.72, l.page_h - m}};
    for (int q = 1; q <= 20; ++q) {
        double col_x = (q <= 10) ? 0.10 : 0.55;
        double row_y = 0.30 + ((q - 1) % 10) * 0.094;
        for (int alt = 0; alt < 4; ++alt)
            l.boxes.push_back({q, alt, {col_x + 0.055 + alt * 0.040, row_y, 0.024, 0.024}});
    }
    l.text_fields = {{"name", {0.10, 0.12, 0.38, 0.035}},
                     {"email", {0.10, 0.17, 0.38, 0.035}},
                     {"person_id", {0.10, 0.22, 0.38, 0.035}},
                     {"signature", {0.55, 0.12, 0.36, 0.035}},
                     {"date", {0.55, 0.17, 0.36, 0.035}}};
    l.score_box = {0.40, 0.025, 0.24, 0.04};
    return l;
}

inline std::string serialize_layout(const SheetLayout& l) {
    nlohmann::json j;
    j["version"] = l.version;
    j["page"] = {{"width", l.page_w},
                 {"height", l.page_h},
                 {"width_mm", l.width_mm},
                 {"dpi", l.dpi}};
    j["spiral"] = {{"extent", l.spiral_extent}, {"frequency", l.frequency}};
    const char* corner_names[4] = {"tl", "tr", "bl", "br"};
    for (int i = 0; i < 4; ++i)
        j["corner_anchors"][corner_names[i]] = {l.corner_anchors[i].x, l.corner_anchors[i].y};
    for (const auto& a : l.bottom_anchors) j["bottom_anchors"].push_back({a.x, a.y});
    for (const auto& b : l.boxes)
        j["boxes"].push_back({{"question", b.question},
                              {"alternative", b.alternative},
                              {"rect", {b.rect.x, b.rect.y, b.rect.w, b.rect.h}}});
    for (const auto& f : l.text_fields)
        j["text_fields"].push_back(
            {{"label", f.label}, {"rect", {f.rect.x, f.rect.y, f.rect.w, f.rect.h}}});
    j["score_box"] = {l.score_box.x, l.score_box.y, l.score_box.w, l.score_box.h};
    j["marking"] = {{"fill_fraction", l.marking.fill_fraction},
                    {"darkness_cut", l.marking.darkness_cut},
                    {"box_erosion", l.marking.box_erosion}};
    return j.dump(2) + "\n";
}

inline SheetLayout parse_layout(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    SheetLayout l;
    l.version = j.at("version").get<int>();
    if (l.version != 1) throw std::invalid_argument("layout: unsupported version");
    const auto& page = j.at("page");
    l.page_w = page.at("width").get<double>();
    l.page_h = page.at("height").get<double>();
    l.width_mm = page.at("width_mm").get<double>();
    l.dpi = page.at("dpi").get<int>();
    l.spiral_extent = j.at("spiral").at("extent").get<double>();
    l.frequency = j.at("spiral").at("frequency").get<double>();
    const char* corner_names[4] = {"tl", "tr", "bl", "br"};
    for (int i = 0; i < 4; ++i) {
        const auto& a = j.at("corner_anchors").at(corner_names[i]);
        l.corner_anchors[i] = {a.at(0).get<double>(), a.at(1).get<double>()};
    }
    const auto& bottom = j.at("bottom_anchors");
    if (bottom.size() != 4) throw std::invalid_argument("layout: expected 4 bottom anchors");
    for (int i = 0; i < 4; ++i)
        l.bottom_anchors[i] = {bottom[i].at(0).get<double>(), bottom[i].at(1).get<double>()};
    l.boxes.clear();
    for (const auto& b : j.at("boxes")) {
        const auto& r = b.at("rect");
        l.boxes.push_back({b.at("question").get<int>(), b.at("alternative").get<int>(),
                           {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>(),
                            r.at(3).get<double>()}});
    }
    l.text_fields.clear();
    for (const auto& f : j.at("text_fields")) {
        const auto& r = f.at("rect");
        l.text_fields.push_back({f.at("label").get<std::string>(),
                                 {r.at(0).get<double>(), r.at(1).get<double>(),
                                  r.at(2).get<double>(), r.at(3).get<double>()}});
    }
    const auto& s = j.at("score_box");
    l.score_box = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>(),
                   s.at(3).get<double>()};
    const auto& mk = j.at("marking");
    l.marking.fill_fraction = mk.at("fill_fraction").get<double>();
    l.marking.darkness_cut = mk.at("darkness_cut").get<double>();
    l.marking.box_erosion = mk.at("box_erosion").get<double>();
    return l;
}

namespace detail {

inline void draw_rect_outline(GrayImage& img, PxRect r, int thickness, float value) {
    for (int t = 0; t < thickness; ++t) {
        int x0 = r.x0 + t, x1 = r.x1 - t, y0 = r.y0 + t, y1 = r.y1 - t;
        if (x0 > x1 || y0 > y1) return;
        for (int x = std::max(0, x0); x <= std::min(img.width - 1, x1); ++x) {
            if (y0 >= 0 && y0 < img.height) img.at(x, y0) = value;
            if (y1 >= 0 && y1 < img.height) img.at(x, y1) = value;
        }
        for (int y = std::max(0, y0); y <= std::min(img.height - 1, y1); ++y) {
            if (x0 >= 0 && x0 < img.width) img.at(x0, y) = value;
            if (x1 >= 0 && x1 < img.width) img.at(x1, y) = value;
        }
    }
}

inline void fill_rect(GrayImage& img, PxRect r, float value) {
    for (int y = std::max(0, r.y0); y <= std::min(img.height - 1, r.y1); ++y)
        for (int x = std::max(0, r.x0); x <= std::min(img.width - 1, r.x1); ++x)
            img.at(x, y) = value;
}

}  // namespace detail

/// Render one personalized sheet: orientation spiral top-left, quiz-code
/// spirals on the other corners, student-code spirals along the bottom,
/// outlined answer boxes, and the student's printed details.
inline GrayImage render_sheet(const SheetLayout& layout, const QuizCode& quiz,
                              const StudentRecord& student) {
    validate_layout(layout);
    decode_quiz(quiz);
    StudentCode code = encode_student(student.student_index);
    const double ppu = pixels_per_unit(layout);
    const double extent_px = layout.spiral_extent * ppu;
    const SpiralAlphabet alphabet = SpiralAlphabet::standard();

    GrayImage sheet(sheet_width_px(layout), sheet_height_px(layout), 1.0f);
    auto stamp = [&](Vec2 anchor, int symbol) {
        stamp_spiral(sheet, layout_to_px(layout, anchor), extent_px, alphabet.symbols[symbol],
                     layout.frequency);
    };
    stamp(layout.corner_anchors[0], 0);
    stamp(layout.corner_anchors[1], quiz.corner_tr);
    stamp(layout.corner_anchors[2], quiz.corner_bl);
    stamp(layout.corner_anchors[3], quiz.corner_br);
    int digits[4] = {code.s1, code.s2, code.s3, code.s4};
    for (int i = 0; i < 4; ++i) stamp(layout.bottom_anchors[i], digits[i]);

    const int scale = std::max(1, static_cast<int>(std::lround(ppu * 0.0016)));
    const int thick = std::max(1, static_cast<int>(std::lround(ppu * 0.0010)));
    const int glyph_h = kGlyphHeight * scale;

    for (const auto& b : layout.boxes) {
        detail::PxRect r = detail::rect_to_px(layout, b.rect);
        detail::draw_rect_outline(sheet, r, thick, 0.0f);
        if (b.alternative == 0) {
            std::string label = std::to_string(b.question);
            int lx = r.x0 - text_width_px(label, scale) - 8 * scale;
            int ly = (r.y0 + r.y1 + 1 - glyph_h) / 2;
            draw_text(sheet, lx, ly, label, scale);
        }
        if ((b.question - 1) % 10 == 0) {
            std::string head(1, static_cast<char>('A' + b.alternative));
            int hx = (r.x0 + r.x1 + 1 - text_width_px(head, scale)) / 2;
            draw_text(sheet, hx, r.y0 - glyph_h - 3 * scale, head, scale);
        }
    }

    for (const auto& f : layout.text_fields) {
        detail::PxRect r = detail::rect_to_px(layout, f.rect);
        std::string label = f.label;
        std::transform(label.begin(), label.end(), label.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        label += ": ";
        const std::string* value = nullptr;
        if (f.label == "name") value = &student.name;
        else if (f.label == "email") value = &student.email;
        else if (f.label == "person_id") value = &student.person_id;
        int ty = (r.y0 + r.y1 + 1 - glyph_h) / 2;
        draw_text(sheet, r.x0, ty, label, scale);
        if (value) draw_text(sheet, r.x0 + text_width_px(label, scale), ty, *value, scale);
        detail::fill_rect(sheet, {r.x0, r.y1 - thick + 1, r.x1, r.y1}, 0.0f);
    }

    detail::PxRect sb = detail::rect_to_px(layout, layout.score_box);
    detail::draw_rect_outline(sheet, sb, thick, 0.0f);
    draw_text(sheet, sb.x0 + 2 * scale, (sb.y0 + sb.y1 + 1 - glyph_h) / 2, "SCORE", scale);
    return sheet;
}

/// Simulate a student's pen: darken the interior of each referenced box.
inline GrayImage fill_boxes(const GrayImage& sheet, const SheetLayout& layout,
                            const std::vector<std::pair<int, int>>& answers) {
    GrayImage out = sheet;
    for (auto [question, alternative] : answers) {
        const BoxSpec* box = find_box(layout, question, alternative);
        if (!box) throw std::invalid_argument("fill_boxes: unknown question/alternative");
        detail::PxRect r = detail::rect_to_px(layout, box->rect);
        int ix = static_cast<int>(std::lround((r.x1 - r.x0 + 1) * 0.10));
        int iy = static_cast<int>(std::lround((r.y1 - r.y0 + 1) * 0.10));
        detail::fill_rect(out, {r.x0 + ix, r.y0 + iy, r.x1 - ix, r.y1 - iy}, 0.08f);
    }
    return out;
}

}  // namespace spiralquiz
