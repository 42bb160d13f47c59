#pragma once

// Initialization from posed panoramas: lift and merge the per-view layouts, sample the merged
// layout, back-project and scale-align the depths, fuse, and build the Gaussian scene.

#include "panosplat/init.hpp"
#include "panosplat/layout.hpp"

#include <optional>
#include <vector>

namespace panosplat {

struct PanoramaInput {
    PanoramaCamera camera;
    Image rgb;
    std::optional<LayoutBoundary> layout;
    std::optional<Image> depth;
};

struct PipelineOptions {
    double layout_density = 400.0; ///< points per square meter
    double voxel = 0.05;
    int depth_stride = 1;
    bool align_depth = true;
    std::uint64_t seed = 0;
    LiftOptions lift;
    UnionOptions merge;
};

struct InitCloud {
    RoomLayout3D layout;
    PointCloud cloud;
    std::vector<double> depth_scales; ///< one per input with depth, in input order
};

/// Throws InvalidParameterError when no input carries a layout boundary.
InitCloud build_init_cloud(const std::vector<PanoramaInput>& inputs, const PipelineOptions& opt = {});

} // namespace panosplat
