#pragma once

// Reference renderer: every pixel against every Gaussian, no tiling, no bounding boxes.
// Built only from the core projection operations so it can check the tiled rasterizer.

#include "panosplat/camera.hpp"
#include "panosplat/gaussian.hpp"
#include "panosplat/image.hpp"
#include "panosplat/rasterizer.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <numeric>

namespace panosplat::testing {

inline Image naive_render(const GaussianScene& scene, const PanoramaCamera& cam,
                          const RenderSettings& settings = {}) {
    struct Item {
        double depth;
        std::size_t index;
        Vec3 mu, bu, bv;
        Mat2 conic;
        double opacity;
        Vec3 color;
    };
    const int degree = settings.active_sh_degree < 0 ? scene.sh_degree
                                                     : std::min(settings.active_sh_degree, scene.sh_degree);
    std::vector<Item> items;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const Vec3 t = cam.to_camera(scene.position(i));
        if (t.norm() <= kNearEpsilon || t.norm() <= kFrontEpsilon) continue;
        const Vec3 mp = project_to_sphere(t);
        const auto frame = make_tangent_frame(mp);
        const Mat3 sigma = build_covariance(scene.log_scale(i).array().exp(), scene.rotation(i));
        const Mat2 cov = splat_covariance(sigma, cam.rotation, tangent_jacobian(t, mp), frame,
                                          lowpass_floor(cam.height));
        Vec3 color = eval_sh(degree, scene.sh_of(i), (scene.position(i) - cam.center()).normalized());
        color = color.cwiseMax(0.0).cwiseMin(1.0);
        items.push_back({t.norm(), i, mp, frame.basis_u, frame.basis_v, cov.inverse(),
                         sigmoid(scene.opacity_logits[i]), color});
    }
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
    });
    const double cut2 = settings.cutoff_sigma * settings.cutoff_sigma;
    Image out(cam.height, cam.width, 3);
    for (int r = 0; r < cam.height; ++r) {
        for (int c = 0; c < cam.width; ++c) {
            const Vec3 d = pixel_to_direction(r + 0.5, c + 0.5, cam.height, cam.width);
            double trans = 1.0;
            Vec3 col = Vec3::Zero();
            for (const auto& it : items) {
                const double md = it.mu.dot(d);
                if (md <= kFrontEpsilon) continue;
                const Vec3 hit = d / md - it.mu;
                const Vec2 x(it.bu.dot(hit), it.bv.dot(hit));
                const double m = x.dot(it.conic * x);
                if (m > cut2) continue;
                const double alpha = std::min(settings.alpha_clamp, it.opacity * std::exp(-0.5 * m));
                col += alpha * trans * it.color;
                trans *= 1.0 - alpha;
                if (trans < settings.min_transmittance) break;
            }
            col += trans * settings.background;
            for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = col[ch];
        }
    }
    return out;
}

inline double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

} // namespace panosplat::testing
