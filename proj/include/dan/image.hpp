#pragma once

#include <cstddef>
#include <vector>

namespace dan {

/// H x W x C raster with interleaved channels, pixel values as 64-bit reals
/// (datasets load 8-bit pixels as v/255).
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;
    std::vector<double> pix;  // (y * width + x) * channels + c

    Image() = default;
    Image(std::size_t h, std::size_t w, std::size_t c)
        : height(h), width(w), channels(c), pix(h * w * c, 0.0) {}

    double at(std::size_t y, std::size_t x, std::size_t c = 0) const {
        return pix[(y * width + x) * channels + c];
    }
    double& at(std::size_t y, std::size_t x, std::size_t c = 0) {
        return pix[(y * width + x) * channels + c];
    }
};

}  // namespace dan
