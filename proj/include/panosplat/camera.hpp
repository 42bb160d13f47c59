#pragma once

#include "panosplat/projection.hpp"

namespace panosplat {

/// Equirectangular camera: t = rotation * x + translation maps world to camera space.
struct PanoramaCamera {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    int height = 512;
    int width = 1024;

    [[nodiscard]] Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
    [[nodiscard]] Vec3 to_world(const Vec3& cam) const { return rotation.transpose() * (cam - translation); }
    [[nodiscard]] Vec3 center() const { return -(rotation.transpose() * translation); }

    /// Throws InvalidParameterError unless the rotation is orthonormal with det +1 (1e-9)
    /// and width == 2 * height.
    void validate() const;

    static PanoramaCamera from_pose(const Vec4& quat_wxyz, const Vec3& translation, int height,
                                    int width);
    /// Camera at `center` with identity orientation.
    static PanoramaCamera at(const Vec3& center, int height, int width);
};

/// Rotation about the camera y axis that increases longitude by `delta` radians.
Mat3 yaw_rotation(double delta);

/// (w, x, y, z) quaternion of a rotation matrix.
Vec4 rotation_to_quaternion(const Mat3& r);

} // namespace panosplat
