#include "gdiff/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace gdiff {

ImageGrid png_read(const std::filesystem::path& path) {
    FILE* fp = std::fopen(path.string().c_str(), "rb");
    if (fp == nullptr) throw std::runtime_error("cannot open image: " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (png == nullptr || info == nullptr || setjmp(png_jmpbuf(png))) {
        if (png != nullptr) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("failed to decode PNG: " + path.string());
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    png_set_expand(png);          // palette/low-bit -> 8 bit
    png_set_strip_16(png);        // 16 bit -> 8 bit
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int channels = static_cast<int>(png_get_channels(png, info));
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("unsupported PNG channel count: " + path.string());
    }

    std::vector<png_byte> row(static_cast<size_t>(width) * channels);
    ImageGrid img = ImageGrid::blank(height, width, channels, 0.0);
    for (int r = 0; r < height; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (int c = 0; c < width; ++c) {
            for (int ch = 0; ch < channels; ++ch) {
                img.at(r, c, ch) = row[static_cast<size_t>(c) * channels + ch] / 255.0;
            }
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

void png_write(const std::filesystem::path& path, const ImageGrid& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw std::invalid_argument("png_write: channels must be 1 or 3");
    }
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (fp == nullptr) throw std::runtime_error("cannot write image: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (png == nullptr || info == nullptr || setjmp(png_jmpbuf(png))) {
        if (png != nullptr) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("failed to encode PNG: " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(static_cast<size_t>(img.width) * img.channels);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            for (int ch = 0; ch < img.channels; ++ch) {
                const double v = std::min(1.0, std::max(0.0, img.at(r, c, ch)));
                row[static_cast<size_t>(c) * img.channels + ch] =
                    static_cast<png_byte>(std::lround(v * 255.0));
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

ImageGrid warp_image(const ImageGrid& img, const TpsTransform& t_inverse) {
    ImageGrid out = ImageGrid::blank(img.height, img.width, img.channels, 0.0);
    const double w = img.width;
    const double h = img.height;

    Eigen::MatrixXd coords(static_cast<int>(img.width), 2);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            coords(c, 0) = (c + 0.5) / w;
            coords(c, 1) = (r + 0.5) / h;
        }
        const Eigen::MatrixXd mapped = apply_tps(t_inverse, coords);
        for (int c = 0; c < img.width; ++c) {
            // Normalized source position -> pixel-center coordinates.
            const double sx = mapped(c, 0) * w - 0.5;
            const double sy = mapped(c, 1) * h - 0.5;
            const double fx = std::floor(sx);
            const double fy = std::floor(sy);
            const double ax = sx - fx;
            const double ay = sy - fy;
            const int x0 = std::min(std::max(static_cast<int>(fx), 0), img.width - 1);
            const int x1 = std::min(std::max(static_cast<int>(fx) + 1, 0), img.width - 1);
            const int y0 = std::min(std::max(static_cast<int>(fy), 0), img.height - 1);
            const int y1 = std::min(std::max(static_cast<int>(fy) + 1, 0), img.height - 1);
            for (int ch = 0; ch < img.channels; ++ch) {
                const double top = img.at(y0, x0, ch) * (1.0 - ax) + img.at(y0, x1, ch) * ax;
                const double bot = img.at(y1, x0, ch) * (1.0 - ax) + img.at(y1, x1, ch) * ax;
                out.at(r, c, ch) = top * (1.0 - ay) + bot * ay;
            }
        }
    }
    return out;
}

namespace {

// Golden-ratio hue ladder; saturation/value fixed.
void keypoint_color(int index, double rgb[3]) {
    const double hue = std::fmod(0.61803398875 * index, 1.0) * 6.0;
    const double s = 0.85, v = 0.95;
    const int sector = static_cast<int>(hue) % 6;
    const double f = hue - std::floor(hue);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (sector) {
        case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
        case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
        case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
        case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
        case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
        default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
    }
}

}  // namespace

ImageGrid render_overlay(const KeypointFrame& frame, const ImageGrid& canvas,
                         const std::function<void(const std::string&)>& warn) {
    ImageGrid out = canvas;
    if (out.channels == 1) {
        // Promote to RGB so the discs are distinguishable.
        ImageGrid rgb = ImageGrid::blank(out.height, out.width, 3, 0.0);
        for (int r = 0; r < out.height; ++r)
            for (int c = 0; c < out.width; ++c)
                for (int ch = 0; ch < 3; ++ch) rgb.at(r, c, ch) = out.at(r, c, 0);
        out = std::move(rgb);
    }
    constexpr int kRadius = 3;
    for (int k = 0; k < frame.num_keypoints(); ++k) {
        double x = frame.x(k);
        double y = frame.y(k);
        if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) {
            if (warn) {
                warn("keypoint " + std::to_string(k) + " outside [0,1]^2, clipping to border");
            }
            x = std::min(1.0, std::max(0.0, x));
            y = std::min(1.0, std::max(0.0, y));
        }
        const int cx = static_cast<int>(std::lround(x * (out.width - 1)));
        const int cy = static_cast<int>(std::lround(y * (out.height - 1)));
        double rgb[3];
        keypoint_color(k, rgb);
        for (int dy = -kRadius; dy <= kRadius; ++dy) {
            for (int dx = -kRadius; dx <= kRadius; ++dx) {
                if (dx * dx + dy * dy > kRadius * kRadius) continue;
                const int r = cy + dy;
                const int c = cx + dx;
                if (r < 0 || r >= out.height || c < 0 || c >= out.width) continue;
                for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = rgb[ch];
            }
        }
    }
    return out;
}

}  // namespace gdiff
