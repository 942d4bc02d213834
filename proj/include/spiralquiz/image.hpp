#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace spiralquiz {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Vec2&) const = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

/// Single-channel raster, values in [0,1], row-major. 0 is ink, 1 is paper.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<float> samples;

    GrayImage() = default;
    GrayImage(int w, int h, float fill = 0.0f)
        : width(w), height(h), samples(static_cast<size_t>(w) * h, fill) {}

    float& at(int x, int y) { return samples[static_cast<size_t>(y) * width + x]; }
    float at(int x, int y) const { return samples[static_cast<size_t>(y) * width + x]; }
    const float* row(int y) const { return samples.data() + static_cast<size_t>(y) * width; }
    float* row(int y) { return samples.data() + static_cast<size_t>(y) * width; }
    size_t size() const { return samples.size(); }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

/// Complex-valued raster stored as two double planes.
struct ComplexImage {
    int width = 0;
    int height = 0;
    std::vector<double> re;
    std::vector<double> im;

    ComplexImage() = default;
    ComplexImage(int w, int h)
        : width(w), height(h),
          re(static_cast<size_t>(w) * h, 0.0), im(static_cast<size_t>(w) * h, 0.0) {}

    std::complex<double> at(int x, int y) const {
        size_t i = static_cast<size_t>(y) * width + x;
        return {re[i], im[i]};
    }
    void set(int x, int y, std::complex<double> v) {
        size_t i = static_cast<size_t>(y) * width + x;
        re[i] = v.real();
        im[i] = v.imag();
    }
    size_t size() const { return re.size(); }
};

/// 8-bit RGB raster.
struct ColorImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> rgb;  // 3 bytes per pixel, row-major

    ColorImage() = default;
    ColorImage(int w, int h, uint8_t r = 255, uint8_t g = 255, uint8_t b = 255)
        : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3) {
        for (size_t i = 0; i < rgb.size(); i += 3) {
            rgb[i] = r;
            rgb[i + 1] = g;
            rgb[i + 2] = b;
        }
    }

    uint8_t* px(int x, int y) { return rgb.data() + (static_cast<size_t>(y) * width + x) * 3; }
    const uint8_t* px(int x, int y) const {
        return rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
    }
    void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
        uint8_t* p = px(x, y);
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }
};

inline ColorImage to_color(const GrayImage& g) {
    ColorImage c(g.width, g.height);
    for (size_t i = 0; i < g.size(); ++i) {
        float v = std::clamp(g.samples[i], 0.0f, 1.0f);
        auto b = static_cast<uint8_t>(std::lround(v * 255.0f));
        c.rgb[i * 3] = b;
        c.rgb[i * 3 + 1] = b;
        c.rgb[i * 3 + 2] = b;
    }
    return c;
}

/// Similarity map p -> scale * R(rotation) * p + translation.
struct SimilarityTransform {
    double rotation = 0.0;  // radians
    double scale = 1.0;
    Vec2 translation;

    Vec2 apply(Vec2 p) const {
        double c = std::cos(rotation), s = std::sin(rotation);
        return {scale * (c * p.x - s * p.y) + translation.x,
                scale * (s * p.x + c * p.y) + translation.y};
    }

    SimilarityTransform inverse() const {
        if (scale <= 0.0) throw std::invalid_argument("similarity scale must be positive");
        SimilarityTransform inv;
        inv.rotation = -rotation;
        inv.scale = 1.0 / scale;
        double c = std::cos(-rotation), s = std::sin(-rotation);
        inv.translation = {-inv.scale * (c * translation.x - s * translation.y),
                           -inv.scale * (s * translation.x + c * translation.y)};
        return inv;
    }

    /// this ∘ other: apply `other` first.
    SimilarityTransform compose(const SimilarityTransform& other) const {
        SimilarityTransform out;
        out.rotation = rotation + other.rotation;
        out.scale = scale * other.scale;
        out.translation = apply(other.translation);
        return out;
    }
};

namespace detail {

inline std::complex<double> ipow(std::complex<double> z, int m) {
    if (m < 0) return 1.0 / ipow(z, -m);
    std::complex<double> acc(1.0, 0.0);
    while (m > 0) {
        acc *= z;
        --m;
    }
    return acc;
}

inline float cubic_weight(float t) {
    // Catmull-Rom
    float a = std::fabs(t);
    if (a < 1.0f) return 1.0f - 2.5f * a * a + 1.5f * a * a * a;
    if (a < 2.0f) return 2.0f - 4.0f * a + 2.5f * a * a - 0.5f * a * a * a;
    return 0.0f;
}

}  // namespace detail

/// Bicubic sample at continuous (x, y); pixel centers sit on integer coordinates.
/// More than one pixel outside the image returns `fill`.
inline float sample_bicubic(const GrayImage& img, double x, double y, float fill = 1.0f) {
    if (x < -0.5 || y < -0.5 || x > img.width - 0.5 || y > img.height - 0.5) return fill;
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    float fx = static_cast<float>(x - x0);
    float fy = static_cast<float>(y - y0);
    float wx[4], wy[4];
    for (int i = 0; i < 4; ++i) {
        wx[i] = detail::cubic_weight(fx - static_cast<float>(i - 1));
        wy[i] = detail::cubic_weight(fy - static_cast<float>(i - 1));
    }
    float acc = 0.0f;
    for (int j = 0; j < 4; ++j) {
        int yy = std::clamp(y0 + j - 1, 0, img.height - 1);
        const float* r = img.row(yy);
        float rowacc = 0.0f;
        for (int i = 0; i < 4; ++i) {
            int xx = std::clamp(x0 + i - 1, 0, img.width - 1);
            rowacc += wx[i] * r[xx];
        }
        acc += wy[j] * rowacc;
    }
    return acc;
}

/// Resample `src` onto a w×h canvas; `dst_to_src` maps output pixel coordinates
/// into source pixel coordinates. Samples are clamped back into [0,1].
inline GrayImage warp_similarity(const GrayImage& src, const SimilarityTransform& dst_to_src,
                                 int w, int h, float fill = 1.0f) {
    GrayImage out(w, h);
    double c = std::cos(dst_to_src.rotation) * dst_to_src.scale;
    double s = std::sin(dst_to_src.rotation) * dst_to_src.scale;
    for (int y = 0; y < h; ++y) {
        // incremental: p(x) = p(0) + x * column step
        double sx = c * 0.0 - s * y + dst_to_src.translation.x;
        double sy = s * 0.0 + c * y + dst_to_src.translation.y;
        float* r = out.row(y);
        for (int x = 0; x < w; ++x) {
            float v = sample_bicubic(src, sx, sy, fill);
            r[x] = std::clamp(v, 0.0f, 1.0f);
            sx += c;
            sy += s;
        }
    }
    return out;
}

/// Exact 90°-step rotation; `quarter_turns` counts clockwise quarter turns (mod 4).
inline GrayImage rotate_quarter(const GrayImage& src, int quarter_turns) {
    int q = ((quarter_turns % 4) + 4) % 4;
    if (q == 0) return src;
    if (q == 2) {
        GrayImage out(src.width, src.height);
        for (int y = 0; y < src.height; ++y)
            for (int x = 0; x < src.width; ++x)
                out.at(x, y) = src.at(src.width - 1 - x, src.height - 1 - y);
        return out;
    }
    GrayImage out(src.height, src.width);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            out.at(x, y) = (q == 1) ? src.at(y, src.height - 1 - x)   // clockwise
                                    : src.at(src.width - 1 - y, x);  // counter-clockwise
    return out;
}

}  // namespace spiralquiz
