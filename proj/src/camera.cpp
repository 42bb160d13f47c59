#include "panosplat/camera.hpp"

#include "panosplat/error.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <string>

namespace panosplat {

void PanoramaCamera::validate() const {
    if (height <= 0 || width <= 0) throw InvalidParameterError("camera resolution must be positive");
    if (width != 2 * height) {
        throw InvalidParameterError("equirectangular camera requires width == 2*height, got " +
                                    std::to_string(height) + "x" + std::to_string(width));
    }
    if (!rotation.allFinite() || !translation.allFinite()) {
        throw InvalidParameterError("camera pose is not finite");
    }
    const double ortho = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9) {
        throw InvalidParameterError("camera rotation is not a proper rotation");
    }
}

PanoramaCamera PanoramaCamera::from_pose(const Vec4& q, const Vec3& t, int height, int width) {
    PanoramaCamera cam;
    cam.rotation = quaternion_to_rotation(q);
    cam.translation = t;
    cam.height = height;
    cam.width = width;
    return cam;
}

PanoramaCamera PanoramaCamera::at(const Vec3& center, int height, int width) {
    PanoramaCamera cam;
    cam.translation = -center;
    cam.height = height;
    cam.width = width;
    return cam;
}

Mat3 yaw_rotation(double delta) {
    const double c = std::cos(delta), s = std::sin(delta);
    Mat3 r;
    r << c, 0, s, 0, 1, 0, -s, 0, c;
    return r;
}

Vec4 rotation_to_quaternion(const Mat3& r) {
    Eigen::Quaterniond q(r);
    q.normalize();
    if (q.w() < 0) q.coeffs() *= -1.0;
    return {q.w(), q.x(), q.y(), q.z()};
}

} // namespace panosplat
