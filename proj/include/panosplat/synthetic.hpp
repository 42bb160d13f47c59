#pragma once

// Analytic textured box room: exact ray casting for ground-truth panoramas, depth maps and
// layout boundaries. Independent of the Gaussian renderer.

#include "panosplat/camera.hpp"
#include "panosplat/image.hpp"
#include "panosplat/layout.hpp"
#include "panosplat/pipeline.hpp"

#include <vector>

namespace panosplat {

struct BoxRoom {
    /// Axis-aligned bounds in world coordinates (y-down: lo.y() is the ceiling, hi.y() the floor).
    Vec3 lo = Vec3(-2.0, -1.2, -1.5);
    Vec3 hi = Vec3(2.0, 1.6, 1.5);
    /// Period of the sinusoidal texture pattern, meters.
    double period = 0.9;
    double amplitude = 0.18;

    [[nodiscard]] RoomLayout3D layout() const;

    /// First intersection of the ray o + t d (t > 0) with the box from inside; returns t and
    /// the face index (0..5: -x, +x, -y, +y, -z, +z).
    [[nodiscard]] double intersect(const Vec3& o, const Vec3& d, int* face = nullptr) const;

    /// Surface color at a point on face `face`.
    [[nodiscard]] Vec3 albedo(const Vec3& p, int face) const;

    /// Inward unit normal of a face.
    [[nodiscard]] static Vec3 face_normal(int face);
};

struct SyntheticView {
    Image color; ///< H x W x 3
    Image depth; ///< H x W x 1, distance along the ray
};

/// Renders the room from `cam` with `samples` x `samples` supersampling per pixel for color.
SyntheticView render_box_room(const BoxRoom& room, const PanoramaCamera& cam, int samples = 2);

/// Four upright camera centers spread over the default room, away from the walls.
std::vector<Vec3> default_box_centers();

/// One posed panorama per center with color, exact depth and the exact layout boundary.
std::vector<PanoramaInput> make_box_inputs(const BoxRoom& room, const std::vector<Vec3>& centers, int height,
                                           int width, int samples = 2);

} // namespace panosplat
