#pragma once

// Room layout priors: lifting floor/ceiling boundaries to 3D, merging per-view layouts,
// sampling layout surfaces, and turning depth panoramas into point clouds.

#include "panosplat/camera.hpp"
#include "panosplat/image.hpp"

#include <cstdint>
#include <vector>

namespace panosplat {

/// Per-column floor-wall and ceiling-wall boundary latitudes of one panorama (radians).
struct LayoutBoundary {
    std::vector<double> floor_lat;
    std::vector<double> ceil_lat;
    double camera_height = 1.6;

    [[nodiscard]] int width() const { return static_cast<int>(floor_lat.size()); }
    /// Throws InvalidBoundaryError unless lengths match and ceil_lat > 0 > floor_lat everywhere.
    void validate() const;
};

struct WallSegment {
    Vec2 a, b; ///< (x, z) endpoints, interior on the left of a -> b
};

/// Atlanta-world room: a floor polygon in world (x, z), horizontal floor and ceiling planes.
struct RoomLayout3D {
    std::vector<Vec2> floor_polygon; ///< counter-clockwise in (x, z)
    double floor_y = 0.0;
    double ceil_y = 0.0; ///< y-down: ceil_y < floor_y

    [[nodiscard]] std::vector<WallSegment> walls() const;
    [[nodiscard]] double area() const;
    [[nodiscard]] bool contains(const Vec2& xz) const;
    /// Throws InvalidParameterError for < 3 vertices, clockwise order or ceil_y >= floor_y.
    void validate() const;
};

/// Signed area in (x, z); positive for counter-clockwise polygons.
double signed_area(const std::vector<Vec2>& poly);
bool point_in_polygon(const std::vector<Vec2>& poly, const Vec2& p);

enum class PointSource : std::uint8_t { layout = 0, depth = 1 };

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<Vec3> colors; ///< rgb in [0, 1]
    std::vector<PointSource> source;

    [[nodiscard]] std::size_t size() const { return points.size(); }
    [[nodiscard]] bool empty() const { return points.empty(); }
    void push_back(const Vec3& p, const Vec3& n, const Vec3& c, PointSource s);
    void append(const PointCloud& other);
    /// Throws ShapeMismatchError if array lengths differ.
    void validate() const;
};

struct LiftOptions {
    /// Merge nearly collinear boundary points into straight walls (Douglas-Peucker tolerance in m,
    /// then a line refit per wall). When false the per-column trace is returned as is.
    bool simplify = true;
    double tolerance = 0.02;
};

/// Per-column floor points in world coordinates: s * d(floor_lat, phi) with s = height / d_y.
std::vector<Vec3> lift_floor_points(const LayoutBoundary& b, const PanoramaCamera& cam);

/// Floor polygon from the lifted floor trace, floor plane at the camera height below the camera,
/// ceiling from the average of the per-column heights rho * tan(ceil_lat).
RoomLayout3D lift_boundary(const LayoutBoundary& b, const PanoramaCamera& cam, const LiftOptions& opt = {});

/// Boundary latitudes of a layout as seen from `cam`, one per column of a panorama of `width`.
/// The camera must be upright and inside the room.
LayoutBoundary layout_to_boundary(const RoomLayout3D& layout, const PanoramaCamera& cam, int width);

struct UnionOptions {
    double cell = 0.02;
    /// Output vertices within this many cells of an input vertex or input edge crossing snap to it.
    double snap_cells = 1.5;
};

/// 2D union of floor polygons on an occupancy grid, outer boundary of the largest
/// 4-connected component, heights averaged with area weights.
RoomLayout3D union_layouts(const std::vector<RoomLayout3D>& layouts, const UnionOptions& opt = {});

/// Stratified jittered samples on the floor, ceiling and every wall, with inward normals.
PointCloud sample_layout(const RoomLayout3D& layout, double density, std::uint64_t seed = 0);

/// One point per valid depth pixel (depth > 0 and finite) with stride `stride` in both axes.
/// Normals come from neighbouring-point cross products, oriented toward the camera.
PointCloud depth_to_cloud(const Image& depth, const Image& rgb, const PanoramaCamera& cam, int stride = 1);

/// Median, over depth points whose ray hits the layout floor inside the polygon, of the ratio
/// between the floor-hit distance and the point distance. Returns 1 with a warning when fewer
/// than `min_points` such points exist.
double align_depth_scale(const PointCloud& cloud, const RoomLayout3D& layout, const PanoramaCamera& cam,
                         std::size_t min_points = 100);

/// Scales point distances from the camera center by `scale`.
void scale_cloud(PointCloud& cloud, const Vec3& center, double scale);

/// Voxel-centroid downsampling of the merged depth clouds, concatenated after the layout cloud.
/// voxel <= 0 disables downsampling.
PointCloud fuse_init(const PointCloud& layout_cloud, const std::vector<PointCloud>& depth_clouds,
                     double voxel = 0.05);

} // namespace panosplat
