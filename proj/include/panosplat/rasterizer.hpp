#pragma once

// Tile-based rasterization of 3D Gaussians into equirectangular panoramas, with the
// matching reverse-mode pass.
//
// A Gaussian is splatted onto the plane tangent to the unit sphere at its projected center
// mu'. A pixel with view direction d sees the Gaussian at the exact intersection of its ray
// with that plane, x = B^T (d / (mu'.d) - mu'), and receives alpha = opacity * exp(-x^T C^-1 x / 2)
// inside the cutoff ellipse x^T C^-1 x <= cutoff^2.

#include "panosplat/camera.hpp"
#include "panosplat/gaussian.hpp"
#include "panosplat/image.hpp"

#include <cstdint>
#include <vector>

namespace panosplat {

/// Inclusive row range and a column run that may wrap around the longitude seam.
struct PixelRect {
    int row_min = 0;
    int row_max = -1;
    int col_start = 0; ///< in [0, W)
    int col_count = 0; ///< columns col_start .. col_start + col_count - 1, modulo W

    [[nodiscard]] bool wraps(int width) const { return col_start + col_count > width; }
    [[nodiscard]] bool contains(int row, int col, int width) const {
        if (row < row_min || row > row_max) return false;
        int d = col - col_start;
        if (d < 0) d += width;
        return d < col_count;
    }
};

struct SplattedGaussian {
    TangentFrame frame;
    Mat2 cov2d = Mat2::Identity();
    double conic_a = 1.0, conic_b = 0.0, conic_c = 1.0; ///< inverse of cov2d
    double depth = 0.0;                                 ///< |t|, camera-space distance
    PixelRect pixel_bbox;
    std::uint32_t gaussian_index = 0;

    // Shading inputs cached for the blend and reverse passes.
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    std::array<bool, 3> color_clamped{};
    Vec3 t_cam = Vec3::Zero();
    bool pole_fallback = false;
};

struct RenderSettings {
    int tile_size = 16;
    Vec3 background = Vec3::Zero();
    double alpha_clamp = 0.99;
    double min_transmittance = 1e-4;
    double cutoff_sigma = 3.0;
    /// Spherical-harmonic degree used for shading; negative means the scene's degree.
    int active_sh_degree = -1;
    bool compute_depth = false;
    /// Worker threads for the pass; 0 lets the scheduler decide.
    int workers = 0;
};

struct TileEntry {
    double depth = 0.0;
    std::uint32_t splat = 0; ///< index into the splat list (ascending in gaussian_index)
};

/// Per-tile depth-sorted splat lists in compressed-row form.
struct TileGrid {
    int tile_size = 16;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::uint32_t> offsets; ///< tiles_x * tiles_y + 1 entries
    std::vector<TileEntry> entries;

    static TileGrid for_image(int height, int width, int tile_size);
    [[nodiscard]] std::size_t tile_count() const { return static_cast<std::size_t>(tiles_x) * tiles_y; }
    [[nodiscard]] std::span<const TileEntry> tile(std::size_t t) const {
        return {entries.data() + offsets[t], entries.data() + offsets[t + 1]};
    }
};

struct RenderOutput {
    Image color;             ///< H x W x 3
    Image alpha;             ///< H x W x 1, accumulated opacity
    Image depth;             ///< H x W x 1 expected depth, empty unless requested
};

/// Everything the reverse pass needs from a forward pass.
struct ForwardState {
    PanoramaCamera camera;
    RenderSettings settings;
    int sh_degree = 0;
    std::vector<SplattedGaussian> splats;
    TileGrid grid;
};

/// Projects every Gaussian; culled Gaussians are omitted. Output is ordered by gaussian_index.
std::vector<SplattedGaussian> splat_all(const GaussianScene& scene, const PanoramaCamera& cam,
                                        const RenderSettings& settings = {});

/// Bins splats into the grid's tiles; each list is sorted by depth then gaussian_index.
TileGrid sort_and_bin(const std::vector<SplattedGaussian>& splats, TileGrid grid, int width);

RenderOutput render(const GaussianScene& scene, const PanoramaCamera& cam,
                    const RenderSettings& settings = {}, ForwardState* state = nullptr);

/// Same as render(), reusing (or producing) a forward state.
RenderOutput render_splats(const ForwardState& state);

struct BackwardResult {
    GaussianScene grads;
    /// |sum over pixels of dL/dx| per Gaussian: gradient of the tangent-plane center offset.
    std::vector<double> tangent_grad_norm;
    /// Pixels that received a non-zero contribution from each Gaussian.
    std::vector<std::uint32_t> touched_pixels;
};

/// Gradients of sum(grad_output * color) w.r.t. every Gaussian parameter. Culling, the
/// footprint cutoff, the alpha clamp and early termination act as zero-gradient gates.
BackwardResult render_backward(const GaussianScene& scene, const ForwardState& state,
                               const Image& grad_output);

} // namespace panosplat
