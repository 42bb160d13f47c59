#include "panosplat/projection.hpp"

#include "panosplat/error.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>

namespace panosplat {

namespace {

bool all_finite(const auto& m) { return m.allFinite(); }

} // namespace

Mat3 quaternion_to_rotation(const Vec4& q) {
    const double n = q.norm();
    if (!std::isfinite(n) || n == 0.0) {
        throw InvalidParameterError("quaternion must be finite and non-zero");
    }
    const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Mat3 build_covariance(const Vec3& scale, const Vec4& quat_wxyz) {
    if (!all_finite(scale) || !all_finite(quat_wxyz)) {
        throw InvalidParameterError("build_covariance: non-finite input");
    }
    if ((scale.array() <= 0.0).any()) {
        throw InvalidParameterError("build_covariance: scale must be positive");
    }
    const Mat3 m = quaternion_to_rotation(quat_wxyz) * scale.asDiagonal();
    return m * m.transpose();
}

std::optional<Vec3> try_project_to_sphere(const Vec3& t) {
    const double n = t.norm();
    if (!(n > kNearEpsilon)) return std::nullopt;
    return Vec3(t / n);
}

Vec3 project_to_sphere(const Vec3& t) {
    auto p = try_project_to_sphere(t);
    if (!p) throw GaussianAtCameraError("point within near epsilon of the camera center");
    return *p;
}

Vec3 tangent_project(const Vec3& t, const Vec3& mu_prime) {
    const double denom = mu_prime.dot(t);
    if (!(denom > kFrontEpsilon)) {
        throw BehindTangentPlaneError("point is behind the tangent plane");
    }
    return t * (mu_prime.squaredNorm() / denom);
}

Mat3 tangent_jacobian(const Vec3& t_k, const Vec3& mu_prime) {
    const double denom = mu_prime.dot(t_k);
    if (!(denom > kFrontEpsilon)) {
        throw BehindTangentPlaneError("point is behind the tangent plane");
    }
    // mu'^T mu' is 1 for a unit projection point; keep it for non-unit inputs.
    const double m2 = mu_prime.squaredNorm();
    return (m2 / (denom * denom)) * (denom * Mat3::Identity() - t_k * mu_prime.transpose());
}

TangentFrame make_tangent_frame(const Vec3& mu_prime) {
    TangentFrame f;
    f.mu_prime = mu_prime;
    // up x mu' with up = (0,-1,0) is (-mz, 0, mx).
    Vec3 u(-mu_prime.z(), 0.0, mu_prime.x());
    if (u.norm() < kPoleBasisEpsilon) {
        // (1,0,0) x mu'
        u = Vec3(0.0, -mu_prime.z(), mu_prime.y());
    }
    f.basis_u = u.normalized();
    f.basis_v = mu_prime.cross(f.basis_u);
    return f;
}

Mat2 splat_covariance(const Mat3& sigma, const Mat3& camera_rot, const Mat3& jac,
                      const TangentFrame& frame, double floor) {
    if (!all_finite(sigma) || !all_finite(camera_rot) || !all_finite(jac)) {
        throw InvalidParameterError("splat_covariance: non-finite input");
    }
    Eigen::Matrix<double, 3, 2> b;
    b.col(0) = frame.basis_u;
    b.col(1) = frame.basis_v;
    const Eigen::Matrix<double, 2, 3> t = b.transpose() * jac * camera_rot;
    Mat2 cov = t * sigma * t.transpose();
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    cov(0, 0) += floor;
    cov(1, 1) += floor;
    return cov;
}

double lowpass_floor(int height_px) {
    const double px = std::numbers::pi / static_cast<double>(height_px);
    return kLowPassPixels * px * px;
}

SphericalAngles spherical_map(const Vec3& t) {
    SphericalAngles a;
    a.theta = std::atan2(-t.y(), std::hypot(t.x(), t.z()));
    a.phi = (t.x() == 0.0 && t.z() == 0.0) ? 0.0 : std::atan2(t.x(), t.z());
    // atan2 returns -pi for (-0, negative); fold it onto the closed end of (-pi, pi].
    if (a.phi == -std::numbers::pi) a.phi = std::numbers::pi;
    return a;
}

PixelCoord angles_to_pixel(double theta, double phi, int height, int width) {
    const double h = height, w = width;
    return {-theta * h / std::numbers::pi + h / 2.0, phi * w / (2.0 * std::numbers::pi) + w / 2.0};
}

SphericalAngles pixel_to_angles(double row, double col, int height, int width) {
    const double h = height, w = width;
    return {(h / 2.0 - row) * std::numbers::pi / h, (col - w / 2.0) * 2.0 * std::numbers::pi / w};
}

Vec3 angles_to_direction(double theta, double phi) {
    const double ct = std::cos(theta);
    return {ct * std::sin(phi), -std::sin(theta), ct * std::cos(phi)};
}

Vec3 pixel_to_direction(double row, double col, int height, int width) {
    const auto a = pixel_to_angles(row, col, height, width);
    return angles_to_direction(a.theta, a.phi);
}

} // namespace panosplat
