#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <system_error>

#include <spiralquiz/spiralquiz.hpp>

namespace testutil {

using namespace spiralquiz;

/// Self-deleting scratch directory for filesystem-facing tests.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() / ("spiralquiz_" + tag);
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

/// White patch with one spiral stamped at the center plus an optional
/// sub-pixel offset.
inline GrayImage spiral_patch(double phi, double sigma, double off_x = 0.0, double off_y = 0.0,
                              int size = 0) {
    if (size == 0) size = PatternSpec::min_patch_size(sigma) + 16;
    GrayImage img(size, size, 1.0f);
    stamp_spiral(img, {(size - 1) / 2.0 + off_x, (size - 1) / 2.0 + off_y}, sigma, phi, 9.2);
    return img;
}

inline double patch_center(const GrayImage& img) { return (img.width - 1) / 2.0; }

}  // namespace testutil
