#pragma once

#include <cstddef>
#include <vector>

namespace panosplat {

/// Dense interleaved image of doubles, row-major: data[(r * width + c) * channels + ch].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c), fill) {}

    [[nodiscard]] bool empty() const { return data.empty(); }
    [[nodiscard]] std::size_t pixel_count() const {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }
    [[nodiscard]] bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
    double& at(int r, int c, int ch = 0) {
        return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
    }
    [[nodiscard]] double at(int r, int c, int ch = 0) const {
        return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
    }
};

/// Columns shifted right by k (wrapping): out(r, (c + k) mod W) = in(r, c).
Image roll_columns(const Image& in, int k);

} // namespace panosplat
