#pragma once

#include "panosplat/projection.hpp"

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace panosplat {

inline constexpr int kMaxShDegree = 3;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// One scene primitive in its unconstrained storage form.
struct Gaussian3D {
    Vec3 position = Vec3::Zero();
    Vec3 log_scale = Vec3::Zero();
    Vec4 rotation = Vec4(1, 0, 0, 0); ///< (w, x, y, z), normalized on read
    double opacity_logit = 0.0;
    /// Spherical-harmonic coefficients, coefficient-major: sh[k * 3 + channel].
    std::vector<double> sh;

    [[nodiscard]] Vec3 scale() const { return log_scale.array().exp(); }
    [[nodiscard]] double opacity() const { return sigmoid(opacity_logit); }
};

enum class ParamGroup { position, log_scale, rotation, opacity, sh };
inline constexpr std::array<ParamGroup, 5> kAllParamGroups = {
    ParamGroup::position, ParamGroup::log_scale, ParamGroup::rotation, ParamGroup::opacity,
    ParamGroup::sh};

std::string_view to_string(ParamGroup g);

/// Structure-of-arrays Gaussian scene. Also used as the gradient container (same layout).
struct GaussianScene {
    int sh_degree = 0;
    std::vector<double> positions;      ///< 3 per Gaussian
    std::vector<double> log_scales;     ///< 3 per Gaussian
    std::vector<double> rotations;      ///< 4 per Gaussian, (w, x, y, z)
    std::vector<double> opacity_logits; ///< 1 per Gaussian
    std::vector<double> sh;             ///< 3 * sh_coeff_count(sh_degree) per Gaussian

    GaussianScene() = default;
    explicit GaussianScene(int degree) : sh_degree(degree) {}

    [[nodiscard]] std::size_t size() const { return opacity_logits.size(); }
    [[nodiscard]] bool empty() const { return opacity_logits.empty(); }
    [[nodiscard]] int sh_stride() const { return 3 * sh_coeff_count(sh_degree); }

    void push_back(const Gaussian3D& g);
    [[nodiscard]] Gaussian3D get(std::size_t i) const;
    void resize(std::size_t n);
    /// Keeps the Gaussians whose mask entry is true, preserving order.
    void filter(const std::vector<bool>& keep);

    Eigen::Map<Vec3> position(std::size_t i) { return Eigen::Map<Vec3>(&positions[3 * i]); }
    Eigen::Map<const Vec3> position(std::size_t i) const {
        return Eigen::Map<const Vec3>(&positions[3 * i]);
    }
    Eigen::Map<Vec3> log_scale(std::size_t i) { return Eigen::Map<Vec3>(&log_scales[3 * i]); }
    Eigen::Map<const Vec3> log_scale(std::size_t i) const {
        return Eigen::Map<const Vec3>(&log_scales[3 * i]);
    }
    Eigen::Map<Vec4> rotation(std::size_t i) { return Eigen::Map<Vec4>(&rotations[4 * i]); }
    Eigen::Map<const Vec4> rotation(std::size_t i) const {
        return Eigen::Map<const Vec4>(&rotations[4 * i]);
    }
    std::span<double> sh_of(std::size_t i) {
        return {sh.data() + i * sh_stride(), static_cast<std::size_t>(sh_stride())};
    }
    std::span<const double> sh_of(std::size_t i) const {
        return {sh.data() + i * sh_stride(), static_cast<std::size_t>(sh_stride())};
    }

    std::span<double> group(ParamGroup g);
    std::span<const double> group(ParamGroup g) const;

    /// Same shape, all zeros.
    [[nodiscard]] GaussianScene zeros_like() const;
    void set_zero();

    /// Renormalizes every stored quaternion to unit length.
    void normalize_rotations();
};

/// Real spherical-harmonic basis values Y_k(dir) for k < sh_coeff_count(degree); dir must be unit.
void sh_basis(int degree, const Vec3& dir, std::span<double> out);
/// d Y_k / d dir for a unit dir (gradient of the polynomial form, before normalization).
void sh_basis_gradient(int degree, const Vec3& dir, std::span<Vec3> out);

/// RGB from SH coefficients (before clamping): sum_k sh_k Y_k(dir) + 0.5.
Vec3 eval_sh(int degree, std::span<const double> coeffs, const Vec3& dir);

/// DC coefficient that produces `rgb` under eval_sh.
Vec3 rgb_to_sh_dc(const Vec3& rgb);

} // namespace panosplat
