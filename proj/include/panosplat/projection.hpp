#pragma once

// Closed-form geometry for splatting Gaussians onto an equirectangular panorama.
//
// Conventions: camera frame is right-handed with y pointing down and z forward.
// Latitude theta is positive above the horizon, longitude phi grows from +z towards +x.
// Continuous pixel coordinates put the center of integer pixel (i, j) at (i + 0.5, j + 0.5).

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <optional>
#include <utility>

namespace panosplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Gaussians closer than this to the camera center are culled.
inline constexpr double kNearEpsilon = 1e-8;
/// Minimum value of mu'.t for a point to be projectable onto a tangent plane.
inline constexpr double kFrontEpsilon = 1e-6;
/// Distance from +-up below which the tangent basis switches to the fallback axis.
inline constexpr double kPoleBasisEpsilon = 1e-6;
/// Low-pass dilation added to the 2D covariance diagonal, in pixel^2.
inline constexpr double kLowPassPixels = 0.3;

struct TangentFrame {
    Vec3 mu_prime = Vec3::UnitZ();
    Vec3 basis_u = Vec3::UnitX();
    Vec3 basis_v = Vec3::UnitY();
};

struct SphericalAngles {
    double theta = 0.0; ///< latitude in [-pi/2, pi/2]
    double phi = 0.0;   ///< longitude in (-pi, pi]
};

struct PixelCoord {
    double row = 0.0;
    double col = 0.0;
};

/// Sigma = R S S^T R^T for a scale vector (already exponentiated) and a quaternion (w, x, y, z).
/// The quaternion is normalized before use. Throws InvalidParameterError on non-finite input.
Mat3 build_covariance(const Vec3& scale, const Vec4& quat_wxyz);

/// Rotation matrix of a quaternion (w, x, y, z); normalizes first.
Mat3 quaternion_to_rotation(const Vec4& quat_wxyz);

/// t / |t|. Throws GaussianAtCameraError when |t| <= kNearEpsilon.
Vec3 project_to_sphere(const Vec3& t);
std::optional<Vec3> try_project_to_sphere(const Vec3& t);

/// Central projection of t onto the plane tangent to the unit sphere at mu_prime.
/// Throws BehindTangentPlaneError when mu_prime.t <= kFrontEpsilon.
Vec3 tangent_project(const Vec3& t, const Vec3& mu_prime);

/// d tangent_project / d t evaluated at t_k: [(mu'.t) I - t mu'^T] / (mu'.t)^2.
Mat3 tangent_jacobian(const Vec3& t_k, const Vec3& mu_prime);

/// Orthonormal tangent frame at mu_prime (unit vector). basis_u = normalize(up x mu'),
/// up = (0,-1,0), falling back to (1,0,0) near the poles; basis_v = mu' x basis_u.
TangentFrame make_tangent_frame(const Vec3& mu_prime);

/// cov2d = B^T (J W Sigma W^T J^T) B + floor * I, with B = [basis_u basis_v].
Mat2 splat_covariance(const Mat3& sigma, const Mat3& camera_rot, const Mat3& jac,
                      const TangentFrame& frame, double floor);

/// Low-pass floor in tangent-plane units (variance) for a panorama of the given height.
double lowpass_floor(int height_px);

SphericalAngles spherical_map(const Vec3& t_prime);
PixelCoord angles_to_pixel(double theta, double phi, int height, int width);
SphericalAngles pixel_to_angles(double row, double col, int height, int width);
Vec3 angles_to_direction(double theta, double phi);
Vec3 pixel_to_direction(double row, double col, int height, int width);

} // namespace panosplat
