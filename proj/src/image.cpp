#include "panosplat/image.hpp"

namespace panosplat {

Image roll_columns(const Image& in, int k) {
    Image out(in.height, in.width, in.channels);
    const int w = in.width;
    const int shift = ((k % w) + w) % w;
    for (int r = 0; r < in.height; ++r) {
        for (int c = 0; c < w; ++c) {
            const int dst = (c + shift) % w;
            for (int ch = 0; ch < in.channels; ++ch) out.at(r, dst, ch) = in.at(r, c, ch);
        }
    }
    return out;
}

} // namespace panosplat
