// image.hpp
// Minimal image grid with PNG I/O, backward TPS warping with bilinear
// sampling, and keypoint overlay rendering for preview figures.

#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "gdiff/core_types.hpp"
#include "gdiff/tps.hpp"

namespace gdiff {

struct ImageGrid {
    int height = 0;
    int width = 0;
    int channels = 0;  // 1 or 3
    std::vector<double> pixels;  // row-major [row][col][channel], values in [0, 1]

    double& at(int r, int c, int ch) {
        return pixels[(static_cast<size_t>(r) * width + c) * channels + ch];
    }
    double at(int r, int c, int ch) const {
        return pixels[(static_cast<size_t>(r) * width + c) * channels + ch];
    }
    static ImageGrid blank(int height, int width, int channels, double fill = 1.0) {
        ImageGrid img;
        img.height = height;
        img.width = width;
        img.channels = channels;
        img.pixels.assign(static_cast<size_t>(height) * width * channels, fill);
        return img;
    }
};

ImageGrid png_read(const std::filesystem::path& path);
void png_write(const std::filesystem::path& path, const ImageGrid& img);

// Backward warp: t_inverse maps normalized output coordinates to
// normalized source coordinates. Bilinear sampling with edge clamping.
ImageGrid warp_image(const ImageGrid& img, const TpsTransform& t_inverse);

// Draws each keypoint as a filled disc (radius 3 px) in a deterministic
// per-index color. Points outside [0,1]^2 are clipped to the border with a
// warning.
ImageGrid render_overlay(const KeypointFrame& frame, const ImageGrid& canvas,
                         const std::function<void(const std::string&)>& warn = {});

}  // namespace gdiff
