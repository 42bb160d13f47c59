#pragma once

// Gaussian scene initialization from a fused point cloud.

#include "panosplat/gaussian.hpp"
#include "panosplat/layout.hpp"
#include "panosplat/losses.hpp"

#include <vector>

namespace panosplat {

struct InitOptions {
    int sh_degree = 3;
    double opacity = 0.1;
    int neighbors = 3;
    double min_scale = 1e-4;
};

struct InitResult {
    GaussianScene scene;
    /// One anchor per layout-tagged point, recording its spawn position and plane normal.
    std::vector<LayoutAnchor> anchors;
};

/// One isotropic Gaussian per point: scale is the RMS distance to the nearest `neighbors`
/// points, color from the point color, identity rotation.
InitResult init_from_cloud(const PointCloud& cloud, const InitOptions& opt = {});

/// RMS distance from every point to its k nearest other points (0 when fewer exist).
std::vector<double> knn_rms_distance(const std::vector<Vec3>& points, int k);

} // namespace panosplat
