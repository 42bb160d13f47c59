#pragma once

// Optimization loop: render a random training view, evaluate the photometric and layout
// losses, back-propagate, step Adam, and periodically densify and prune.

#include "panosplat/camera.hpp"
#include "panosplat/density.hpp"
#include "panosplat/gaussian.hpp"
#include "panosplat/image.hpp"
#include "panosplat/losses.hpp"
#include "panosplat/optimizer.hpp"
#include "panosplat/rasterizer.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace panosplat {

struct TrainView {
    std::string id;
    PanoramaCamera camera;
    Image image;
};

struct TrainConfig {
    LossWeights weights;
    int iterations = 7000;
    LearningRates lr;
    AdamOptions adam;
    SsimOptions ssim;
    DensifyOptions densify;
    int densify_from = 500;
    /// Densification stops at this fraction of `iterations`.
    double densify_until_fraction = 0.75;
    int densify_interval = 100;
    /// Active SH degree grows by one every this many iterations (0 = full degree from the start).
    int sh_increase_interval = 1000;
    int psnr_interval = 100;
    int checkpoint_interval = 0;
    std::uint64_t seed = 0;
    /// Scales the position learning rate and the split threshold; 0 means scene_extent().
    double extent = 0.0;
    RenderSettings render;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

struct MetricsRow {
    std::int64_t iteration = 0;
    std::string view;
    LossTerms loss;
    double psnr = std::numeric_limits<double>::quiet_NaN(); ///< only on psnr_interval iterations
    std::size_t gaussians = 0;
    std::size_t skipped_gradients = 0;
};

/// Everything needed to continue a run.
struct TrainState {
    GaussianScene scene;
    std::vector<LayoutAnchor> anchors;
    Adam adam;
    std::int64_t iteration = 0; ///< iterations completed
    double extent = 0.0;        ///< fixed on the first iteration, kept across resumes
};

struct TrainHooks {
    std::function<void(const MetricsRow&)> on_metrics;
    std::function<void(const TrainState&)> on_checkpoint;
};

/// Prepares a fresh state (optimizer moments sized to the scene).
TrainState make_train_state(GaussianScene scene, std::vector<LayoutAnchor> anchors,
                            const AdamOptions& adam = {});

/// Runs iterations state.iteration .. cfg.iterations - 1. View choice is a pure function of
/// (seed, iteration), so resuming reproduces an uninterrupted run's view sequence.
/// Throws TrainingError (naming the view and iteration) when the loss becomes non-finite.
std::vector<MetricsRow> train(TrainState& state, const std::vector<TrainView>& views,
                              const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Index of the training view used at `iteration`.
std::size_t pick_view(std::uint64_t seed, std::int64_t iteration, std::size_t view_count);

/// Half the diagonal of the axis-aligned box around the Gaussian centers (1 for an empty scene).
double scene_extent(const GaussianScene& scene);

} // namespace panosplat
