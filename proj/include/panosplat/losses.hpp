#pragma once

// Photometric and layout losses with their gradients, plus image quality metrics.

#include "panosplat/gaussian.hpp"
#include "panosplat/image.hpp"

#include <vector>

namespace panosplat {

/// A Gaussian sampled on a layout surface: its spawn position and the surface normal.
struct LayoutAnchor {
    std::size_t gaussian_index = 0;
    Vec3 u0 = Vec3::Zero();
    Vec3 n = Vec3::UnitY();
};

/// Below this movement length a layout anchor contributes nothing.
inline constexpr double kMoveEpsilon = 1e-8;

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Mean absolute difference over all pixels and channels. `grad` (optional) receives d/d rendered.
double l1_loss(const Image& rendered, const Image& target, Image* grad = nullptr);

/// Mean SSIM over pixels and channels, Gaussian window with zero padding at the borders.
double ssim(const Image& rendered, const Image& target, const SsimOptions& opt = {},
            Image* grad = nullptr);

/// 1 - ssim.
double dssim_loss(const Image& rendered, const Image& target, const SsimOptions& opt = {},
                  Image* grad = nullptr);

/// Mean over anchors of |cos| between the anchor normal and the movement mu - u0.
/// `grad` (optional, same shape as scene) receives the position gradient, added in place.
double layout_loss(const GaussianScene& scene, const std::vector<LayoutAnchor>& anchors,
                   GaussianScene* grad = nullptr);

struct LossWeights {
    double l1 = 0.8;
    double dssim = 0.2;
    double layout = 0.1;

    /// Throws ConfigError on negative weights or l1 + dssim == 0.
    void validate() const;
};

struct LossTerms {
    double l1 = 0.0;
    double dssim = 0.0;
    double layout = 0.0;
    double total = 0.0;
};

[[nodiscard]] double combine(const LossWeights& w, double l1, double dssim, double layout);

/// Weighted photometric + layout loss. `grad_image` receives d/d rendered, `grad_scene` (same
/// shape as scene) receives the layout term's position gradient, added in place.
LossTerms total_loss(const Image& rendered, const Image& target, const GaussianScene& scene,
                     const std::vector<LayoutAnchor>& anchors, const LossWeights& weights,
                     const SsimOptions& ssim_opt = {}, Image* grad_image = nullptr,
                     GaussianScene* grad_scene = nullptr);

/// Peak signal-to-noise ratio for a unit dynamic range, capped at 99 dB.
double psnr(const Image& a, const Image& b);

} // namespace panosplat
