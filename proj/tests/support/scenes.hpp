#pragma once

#include "panosplat/gaussian.hpp"
#include "test_random.hpp"

#include <cmath>
#include <random>

namespace panosplat::testing {

struct RandomSceneOptions {
    int count = 50;
    int sh_degree = 0;
    double min_distance = 1.0;
    double max_distance = 5.0;
    double min_scale = 0.05;
    double max_scale = 0.5;
    double min_opacity_logit = -2.0;
    double max_opacity_logit = 2.0;
    double sh_rest_magnitude = 0.05;
    Vec3 center = Vec3::Zero();
};

/// Gaussians scattered over every viewing direction around `center`.
inline GaussianScene random_scene(std::mt19937_64& rng, const RandomSceneOptions& o = {}) {
    GaussianScene scene(o.sh_degree);
    for (int i = 0; i < o.count; ++i) {
        Gaussian3D g;
        g.position = o.center + random_unit(rng) * uniform(rng, o.min_distance, o.max_distance);
        for (int k = 0; k < 3; ++k) g.log_scale[k] = std::log(uniform(rng, o.min_scale, o.max_scale));
        g.rotation = random_quaternion(rng) * uniform(rng, 0.5, 2.0);
        g.opacity_logit = uniform(rng, o.min_opacity_logit, o.max_opacity_logit);
        g.sh.assign(static_cast<std::size_t>(3 * sh_coeff_count(o.sh_degree)), 0.0);
        const Vec3 dc = rgb_to_sh_dc(Vec3(uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8)));
        for (int ch = 0; ch < 3; ++ch) g.sh[static_cast<std::size_t>(ch)] = dc[ch];
        for (std::size_t k = 3; k < g.sh.size(); ++k) g.sh[k] = uniform(rng, -o.sh_rest_magnitude, o.sh_rest_magnitude);
        scene.push_back(g);
    }
    return scene;
}

} // namespace panosplat::testing
