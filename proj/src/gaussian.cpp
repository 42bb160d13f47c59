#include "panosplat/gaussian.hpp"

#include "panosplat/error.hpp"

#include <algorithm>

namespace panosplat {

namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                          -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                          0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                          -0.5900435899266435};

template <typename T>
void filter_strided(std::vector<T>& v, const std::vector<bool>& keep, std::size_t stride) {
    std::size_t out = 0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        if (out != i) {
            std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(i * stride), stride,
                        v.begin() + static_cast<std::ptrdiff_t>(out * stride));
        }
        ++out;
    }
    v.resize(out * stride);
}

} // namespace

std::string_view to_string(ParamGroup g) {
    switch (g) {
    case ParamGroup::position: return "position";
    case ParamGroup::log_scale: return "log_scale";
    case ParamGroup::rotation: return "rotation";
    case ParamGroup::opacity: return "opacity";
    case ParamGroup::sh: return "sh";
    }
    return "?";
}

void GaussianScene::push_back(const Gaussian3D& g) {
    const auto stride = static_cast<std::size_t>(sh_stride());
    if (g.sh.size() > stride) {
        throw InvalidParameterError("Gaussian has more SH coefficients than the scene degree allows");
    }
    positions.insert(positions.end(), g.position.data(), g.position.data() + 3);
    log_scales.insert(log_scales.end(), g.log_scale.data(), g.log_scale.data() + 3);
    rotations.insert(rotations.end(), g.rotation.data(), g.rotation.data() + 4);
    opacity_logits.push_back(g.opacity_logit);
    const std::size_t base = sh.size();
    sh.resize(base + stride, 0.0);
    std::copy(g.sh.begin(), g.sh.end(), sh.begin() + static_cast<std::ptrdiff_t>(base));
}

Gaussian3D GaussianScene::get(std::size_t i) const {
    Gaussian3D g;
    g.position = position(i);
    g.log_scale = log_scale(i);
    g.rotation = rotation(i);
    g.opacity_logit = opacity_logits[i];
    const auto s = sh_of(i);
    g.sh.assign(s.begin(), s.end());
    return g;
}

void GaussianScene::resize(std::size_t n) {
    positions.resize(3 * n, 0.0);
    log_scales.resize(3 * n, 0.0);
    const std::size_t old = rotations.size() / 4;
    rotations.resize(4 * n, 0.0);
    for (std::size_t i = old; i < n; ++i) rotations[4 * i] = 1.0;
    opacity_logits.resize(n, 0.0);
    sh.resize(n * static_cast<std::size_t>(sh_stride()), 0.0);
}

void GaussianScene::filter(const std::vector<bool>& keep) {
    if (keep.size() != size()) throw InvalidParameterError("filter mask size mismatch");
    filter_strided(positions, keep, 3);
    filter_strided(log_scales, keep, 3);
    filter_strided(rotations, keep, 4);
    filter_strided(opacity_logits, keep, 1);
    filter_strided(sh, keep, static_cast<std::size_t>(sh_stride()));
}

std::span<double> GaussianScene::group(ParamGroup g) {
    switch (g) {
    case ParamGroup::position: return positions;
    case ParamGroup::log_scale: return log_scales;
    case ParamGroup::rotation: return rotations;
    case ParamGroup::opacity: return opacity_logits;
    case ParamGroup::sh: return sh;
    }
    return {};
}

std::span<const double> GaussianScene::group(ParamGroup g) const {
    return const_cast<GaussianScene*>(this)->group(g);
}

GaussianScene GaussianScene::zeros_like() const {
    GaussianScene z(sh_degree);
    z.positions.assign(positions.size(), 0.0);
    z.log_scales.assign(log_scales.size(), 0.0);
    z.rotations.assign(rotations.size(), 0.0);
    z.opacity_logits.assign(opacity_logits.size(), 0.0);
    z.sh.assign(sh.size(), 0.0);
    return z;
}

void GaussianScene::set_zero() {
    for (auto g : kAllParamGroups) std::ranges::fill(group(g), 0.0);
}

void GaussianScene::normalize_rotations() {
    for (std::size_t i = 0; i < size(); ++i) {
        auto q = rotation(i);
        const double n = q.norm();
        if (n > 0.0 && std::isfinite(n)) q /= n;
        else q = Vec4(1, 0, 0, 0);
    }
}

void sh_basis(int degree, const Vec3& d, std::span<double> out) {
    const double x = d.x(), y = d.y(), z = d.z();
    out[0] = kC0;
    if (degree < 1) return;
    out[1] = -kC1 * y;
    out[2] = kC1 * z;
    out[3] = -kC1 * x;
    if (degree < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    out[4] = kC2[0] * x * y;
    out[5] = kC2[1] * y * z;
    out[6] = kC2[2] * (2.0 * zz - xx - yy);
    out[7] = kC2[3] * x * z;
    out[8] = kC2[4] * (xx - yy);
    if (degree < 3) return;
    out[9] = kC3[0] * y * (3.0 * xx - yy);
    out[10] = kC3[1] * x * y * z;
    out[11] = kC3[2] * y * (4.0 * zz - xx - yy);
    out[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    out[14] = kC3[5] * z * (xx - yy);
    out[15] = kC3[6] * x * (xx - 3.0 * yy);
}

void sh_basis_gradient(int degree, const Vec3& d, std::span<Vec3> out) {
    const double x = d.x(), y = d.y(), z = d.z();
    out[0] = Vec3::Zero();
    if (degree < 1) return;
    out[1] = Vec3(0, -kC1, 0);
    out[2] = Vec3(0, 0, kC1);
    out[3] = Vec3(-kC1, 0, 0);
    if (degree < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    out[4] = kC2[0] * Vec3(y, x, 0);
    out[5] = kC2[1] * Vec3(0, z, y);
    out[6] = kC2[2] * Vec3(-2 * x, -2 * y, 4 * z);
    out[7] = kC2[3] * Vec3(z, 0, x);
    out[8] = kC2[4] * Vec3(2 * x, -2 * y, 0);
    if (degree < 3) return;
    out[9] = kC3[0] * Vec3(6 * x * y, 3 * xx - 3 * yy, 0);
    out[10] = kC3[1] * Vec3(y * z, x * z, x * y);
    out[11] = kC3[2] * Vec3(-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z);
    out[12] = kC3[3] * Vec3(-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy);
    out[13] = kC3[4] * Vec3(4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z);
    out[14] = kC3[5] * Vec3(2 * x * z, -2 * y * z, xx - yy);
    out[15] = kC3[6] * Vec3(3 * xx - 3 * yy, -6 * x * y, 0);
}

Vec3 eval_sh(int degree, std::span<const double> coeffs, const Vec3& dir) {
    std::array<double, 16> basis{};
    sh_basis(degree, dir, basis);
    Vec3 rgb = Vec3::Constant(0.5);
    for (int k = 0; k < sh_coeff_count(degree); ++k) {
        for (int c = 0; c < 3; ++c) rgb[c] += coeffs[static_cast<std::size_t>(3 * k + c)] * basis[static_cast<std::size_t>(k)];
    }
    return rgb;
}

Vec3 rgb_to_sh_dc(const Vec3& rgb) { return (rgb.array() - 0.5) / kC0; }

} // namespace panosplat
