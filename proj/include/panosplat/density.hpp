#pragma once

// Adaptive density control: clone, split and prune Gaussians based on accumulated
// tangent-plane gradients, keeping layout anchors consistent.

#include "panosplat/gaussian.hpp"
#include "panosplat/losses.hpp"
#include "panosplat/rasterizer.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace panosplat {

/// Running sums of the tangent-plane gradient norm per Gaussian over the views that saw it.
struct DensityStats {
    std::vector<double> grad_sum;
    std::vector<std::uint32_t> views;

    void reset(std::size_t n);
    void add(const BackwardResult& back);
    [[nodiscard]] double mean(std::size_t i) const {
        return views[i] ? grad_sum[i] / views[i] : 0.0;
    }
};

struct DensifyOptions {
    double grad_threshold = 2e-4;
    /// Gaussians whose largest scale exceeds this fraction of scene_extent are split, others cloned.
    double split_fraction = 0.01;
    double scene_extent = 1.0;
    double min_opacity = 0.005;
    std::size_t max_gaussians = 2'000'000;
    double split_scale_divisor = 1.6;
    int split_children = 2;
};

struct DensifyReport {
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
    /// For every Gaussian in the new scene: index of the Gaussian it was kept from, or -1 if new.
    std::vector<std::int64_t> source;
};

/// Clone small high-gradient Gaussians, split large ones, then prune transparent ones.
/// Anchors follow their Gaussian; new copies of an anchored Gaussian get an anchor with the same
/// normal whose u0 is the spawn position projected onto the anchor plane. Anchors of pruned or
/// split-away Gaussians are dropped.
DensifyReport densify_and_prune(GaussianScene& scene, std::vector<LayoutAnchor>& anchors,
                                const DensityStats& stats, const DensifyOptions& opt,
                                std::mt19937_64& rng);

/// Removes Gaussians whose mask entry is false and remaps anchors (dropping orphaned ones).
/// Returns the survivor -> old-index mapping.
std::vector<std::int64_t> prune_gaussians(GaussianScene& scene, std::vector<LayoutAnchor>& anchors,
                                          const std::vector<bool>& keep);

} // namespace panosplat
