#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <vector>

#include "spiralquiz/image.hpp"

namespace spiralquiz {

/// Mirror an index into [0, n) without repeating the border sample
/// (reflect-101: -1 -> 1, n -> n-2). Handles overshoot past one fold.
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

namespace detail {

/// 1-D correlation along rows: dst(x,y) = sum_j k[j] * src(x + j - r, y).
template <typename T>
void correlate_rows(const T* src, int w, int h, const std::vector<double>& k, T* dst) {
    const int r = static_cast<int>(k.size()) / 2;
    const int len = static_cast<int>(k.size());
    for (int y = 0; y < h; ++y) {
        const T* srow = src + static_cast<size_t>(y) * w;
        T* drow = dst + static_cast<size_t>(y) * w;
        const int safe_lo = std::min(r, w);
        const int safe_hi = std::max(safe_lo, w - r);
        for (int x = 0; x < safe_lo; ++x) {
            double acc = 0.0;
            for (int j = 0; j < len; ++j) acc += k[j] * srow[reflect_index(x + j - r, w)];
            drow[x] = static_cast<T>(acc);
        }
        for (int x = safe_lo; x < safe_hi; ++x) {
            const T* s = srow + x - r;
            double acc = 0.0;
            for (int j = 0; j < len; ++j) acc += k[j] * s[j];
            drow[x] = static_cast<T>(acc);
        }
        for (int x = safe_hi; x < w; ++x) {
            double acc = 0.0;
            for (int j = 0; j < len; ++j) acc += k[j] * srow[reflect_index(x + j - r, w)];
            drow[x] = static_cast<T>(acc);
        }
    }
}

/// 1-D correlation along columns, accumulated row-wise for locality.
template <typename T>
void correlate_cols(const T* src, int w, int h, const std::vector<double>& k, T* dst) {
    const int r = static_cast<int>(k.size()) / 2;
    const int len = static_cast<int>(k.size());
    for (int y = 0; y < h; ++y) {
        T* drow = dst + static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) drow[x] = T(0);
        for (int j = 0; j < len; ++j) {
            const T kj = static_cast<T>(k[j]);
            if (kj == T(0)) continue;
            const T* srow = src + static_cast<size_t>(reflect_index(y + j - r, h)) * w;
            for (int x = 0; x < w; ++x) drow[x] += kj * srow[x];
        }
    }
}

}  // namespace detail

/// Separable 2-D correlation with reflective borders:
/// dst(x,y) = sum_{i,j} kx[i] ky[j] src(x+i-rx, y+j-ry).
template <typename T>
std::vector<T> separable_correlate(const std::vector<T>& src, int w, int h,
                                   const std::vector<double>& kx, const std::vector<double>& ky) {
    assert(static_cast<size_t>(w) * h == src.size());
    std::vector<T> tmp(src.size());
    std::vector<T> out(src.size());
    detail::correlate_rows(src.data(), w, h, kx, tmp.data());
    detail::correlate_cols(tmp.data(), w, h, ky, out.data());
    return out;
}

/// Box-average decimation by integer factor; ragged edge pixels average
/// whatever source pixels they cover.
inline GrayImage decimate(const GrayImage& src, int factor) {
    if (factor <= 1) return src;
    int w = (src.width + factor - 1) / factor;
    int h = (src.height + factor - 1) / factor;
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int x0 = x * factor, y0 = y * factor;
            int x1 = std::min(x0 + factor, src.width);
            int y1 = std::min(y0 + factor, src.height);
            float acc = 0.0f;
            for (int yy = y0; yy < y1; ++yy)
                for (int xx = x0; xx < x1; ++xx) acc += src.at(xx, yy);
            out.at(x, y) = acc / static_cast<float>((x1 - x0) * (y1 - y0));
        }
    }
    return out;
}

}  // namespace spiralquiz
