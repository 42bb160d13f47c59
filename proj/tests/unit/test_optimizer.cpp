#include "panosplat/density.hpp"
#include "panosplat/error.hpp"
#include "panosplat/optimizer.hpp"

#include "scenes.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace panosplat;
using namespace panosplat::testing;

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    std::mt19937_64 rng(1);
    RandomSceneOptions opt;
    opt.count = 10;
    opt.sh_degree = 2;
    auto scene = random_scene(rng, opt);
    scene.normalize_rotations();
    const auto before = scene;
    Adam adam(scene);
    for (int i = 0; i < 5; ++i) adam.step(scene, scene.zeros_like(), {}, 1e-3);
    for (auto g : kAllParamGroups) {
        const auto a = before.group(g);
        const auto b = scene.group(g);
        for (std::size_t k = 0; k < a.size(); ++k) EXPECT_DOUBLE_EQ(a[k], b[k]);
    }
}

TEST(Adam, ConvergesOnQuadratic) {
    GaussianScene scene(0);
    Gaussian3D g;
    g.sh = {0, 0, 0};
    scene.push_back(g);
    Adam adam(scene);
    LearningRates lr;
    const double target = 3.0;
    for (int i = 0; i < 5000; ++i) {
        GaussianScene grad = scene.zeros_like();
        grad.opacity_logits[0] = 2.0 * (scene.opacity_logits[0] - target);
        adam.step(scene, grad, lr, 0.0);
    }
    EXPECT_NEAR(scene.opacity_logits[0], target, 1e-6);
    EXPECT_EQ(adam.steps(), 5000);
}

TEST(Adam, QuaternionsStayNormalized) {
    std::mt19937_64 rng(2);
    RandomSceneOptions opt;
    opt.count = 20;
    auto scene = random_scene(rng, opt);
    Adam adam(scene);
    for (int i = 0; i < 10; ++i) {
        GaussianScene grad = scene.zeros_like();
        for (double& v : grad.rotations) v = uniform(rng, -1, 1);
        adam.step(scene, grad, {}, 1e-3);
        for (std::size_t k = 0; k < scene.size(); ++k) EXPECT_NEAR(scene.rotation(k).norm(), 1.0, 1e-9);
    }
}

TEST(Adam, SkipsNonFiniteGradients) {
    GaussianScene scene(0);
    Gaussian3D g;
    g.sh = {0, 0, 0};
    scene.push_back(g);
    scene.push_back(g);
    Adam adam(scene);
    GaussianScene grad = scene.zeros_like();
    grad.opacity_logits[0] = std::numeric_limits<double>::quiet_NaN();
    grad.opacity_logits[1] = 1.0;
    grad.positions[0] = std::numeric_limits<double>::infinity();
    const auto rep = adam.step(scene, grad, {}, 1e-3);
    EXPECT_EQ(rep.skipped_nonfinite, 2u);
    EXPECT_DOUBLE_EQ(scene.opacity_logits[0], 0.0);
    EXPECT_DOUBLE_EQ(scene.positions[0], 0.0);
    EXPECT_NEAR(scene.opacity_logits[1], -5e-2, 1e-12); // first Adam step moves by the full rate
}

TEST(Adam, RejectsMismatchedGradients) {
    GaussianScene scene(0);
    Gaussian3D g;
    g.sh = {0, 0, 0};
    scene.push_back(g);
    Adam adam(scene);
    EXPECT_THROW(adam.step(scene, GaussianScene(0), {}, 1e-3), ShapeMismatchError);
}

TEST(Adam, RemapCarriesMoments) {
    GaussianScene scene(0);
    Gaussian3D g;
    g.sh = {0, 0, 0};
    scene.push_back(g);
    scene.push_back(g);
    Adam adam(scene);
    GaussianScene grad = scene.zeros_like();
    grad.opacity_logits = {1.0, -1.0};
    adam.step(scene, grad, {}, 1e-3);
    // Swap the two and add a fresh one.
    adam.remap({1, 0, -1});
    GaussianScene swapped(0);
    swapped.push_back(scene.get(1));
    swapped.push_back(scene.get(0));
    swapped.push_back(g);
    const double o0 = swapped.opacity_logits[0], o1 = swapped.opacity_logits[1];
    adam.step(swapped, swapped.zeros_like(), {}, 1e-3);
    // With zero gradient, the carried first moment keeps moving each in its old direction.
    EXPECT_GT(swapped.opacity_logits[0], o0);
    EXPECT_LT(swapped.opacity_logits[1], o1);
    EXPECT_DOUBLE_EQ(swapped.opacity_logits[2], 0.0);
}

TEST(LearningRates, PositionDecay) {
    LearningRates lr;
    EXPECT_NEAR(lr.position_at(0, 1000), 1.6e-4, 1e-18);
    EXPECT_NEAR(lr.position_at(1000, 1000), 1.6e-6, 1e-18);
    EXPECT_NEAR(lr.position_at(500, 1000), 1.6e-5, 1e-17);
    lr.position_scale = 2.0;
    EXPECT_NEAR(lr.position_at(0, 1000), 3.2e-4, 1e-18);
}

namespace {

GaussianScene uniform_scene(std::size_t n, double scale, double opacity) {
    GaussianScene s(0);
    for (std::size_t i = 0; i < n; ++i) {
        Gaussian3D g;
        g.position = Vec3(static_cast<double>(i), 0.0, 1.0);
        g.log_scale = Vec3::Constant(std::log(scale));
        g.opacity_logit = logit(opacity);
        g.sh = {0.1, 0.2, 0.3};
        s.push_back(g);
    }
    return s;
}

DensityStats stats_with(std::size_t n, const std::vector<std::pair<std::size_t, double>>& hot) {
    DensityStats st;
    st.reset(n);
    for (auto [i, v] : hot) {
        st.grad_sum[i] = v;
        st.views[i] = 1;
    }
    return st;
}

} // namespace

TEST(Densify, PrunesEverythingTransparent) {
    auto scene = uniform_scene(5, 0.01, 0.001);
    std::vector<LayoutAnchor> anchors = {{0, Vec3::Zero(), Vec3::UnitY()}, {3, Vec3::Zero(), Vec3::UnitY()}};
    std::mt19937_64 rng(1);
    const auto rep = densify_and_prune(scene, anchors, stats_with(5, {}), {}, rng);
    EXPECT_EQ(scene.size(), 0u);
    EXPECT_TRUE(anchors.empty());
    EXPECT_EQ(rep.pruned, 5u);
    EXPECT_TRUE(rep.source.empty());
}

TEST(Densify, NothingAboveThresholdKeepsCount) {
    auto scene = uniform_scene(5, 0.01, 0.5);
    std::vector<LayoutAnchor> anchors;
    std::mt19937_64 rng(1);
    const auto rep = densify_and_prune(scene, anchors, stats_with(5, {{2, 1e-5}}), {}, rng);
    EXPECT_EQ(scene.size(), 5u);
    EXPECT_EQ(rep.source, (std::vector<std::int64_t>{0, 1, 2, 3, 4}));
}

TEST(Densify, LargeGaussianSplitsIntoTwoSmallerChildren) {
    auto scene = uniform_scene(3, 0.5, 0.5);
    std::vector<LayoutAnchor> anchors = {{1, Vec3(1, 0, 1), Vec3(0, 0, -1)}};
    DensifyOptions opt;
    opt.scene_extent = 10.0; // split threshold 0.1
    std::mt19937_64 rng(1);
    const auto rep = densify_and_prune(scene, anchors, stats_with(3, {{1, 1.0}}), opt, rng);
    EXPECT_EQ(rep.split, 1u);
    EXPECT_EQ(scene.size(), 4u);
    EXPECT_EQ(rep.source, (std::vector<std::int64_t>{0, 2, -1, -1}));
    for (std::size_t i = 2; i < 4; ++i) {
        EXPECT_NEAR(std::exp(scene.log_scale(i).x()), 0.5 / 1.6, 1e-12);
    }
    ASSERT_EQ(anchors.size(), 2u);
    for (const auto& a : anchors) {
        EXPECT_GE(a.gaussian_index, 2u);
        // u0 lies on the original anchor plane z = 1.
        EXPECT_NEAR(a.u0.z(), 1.0, 1e-12);
    }
}

TEST(Densify, SmallGaussianIsCloned) {
    auto scene = uniform_scene(3, 0.001, 0.5);
    std::vector<LayoutAnchor> anchors = {{2, Vec3(2, 0, 1), Vec3(0, 0, -1)}};
    std::mt19937_64 rng(1);
    const auto rep = densify_and_prune(scene, anchors, stats_with(3, {{2, 1.0}}), {}, rng);
    EXPECT_EQ(rep.cloned, 1u);
    EXPECT_EQ(scene.size(), 4u);
    EXPECT_EQ(scene.position(3), scene.position(2));
    ASSERT_EQ(anchors.size(), 2u);
    EXPECT_EQ(anchors[0].gaussian_index, 2u);
    EXPECT_EQ(anchors[1].gaussian_index, 3u);
}

TEST(Densify, RespectsGaussianBudget) {
    auto scene = uniform_scene(4, 0.001, 0.5);
    std::vector<LayoutAnchor> anchors;
    DensifyOptions opt;
    opt.max_gaussians = 5;
    std::mt19937_64 rng(1);
    const auto rep = densify_and_prune(scene, anchors, stats_with(4, {{0, 1.0}, {1, 2.0}, {2, 3.0}}), opt, rng);
    EXPECT_EQ(scene.size(), 5u);
    EXPECT_EQ(rep.source.back(), -1);
    EXPECT_EQ(scene.position(4), scene.position(2)); // strongest gradient wins
}

TEST(Densify, AnchorsAlwaysResolve) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        RandomSceneOptions ro;
        ro.count = 30;
        ro.min_opacity_logit = -7.0;
        ro.max_opacity_logit = 0.0;
        auto scene = random_scene(rng, ro);
        std::vector<LayoutAnchor> anchors;
        for (std::size_t i = 0; i < scene.size(); i += 2) anchors.push_back({i, scene.position(i), random_unit(rng)});
        DensityStats st;
        st.reset(scene.size());
        for (std::size_t i = 0; i < scene.size(); ++i) {
            st.grad_sum[i] = uniform(rng, 0.0, 4e-4);
            st.views[i] = 1;
        }
        DensifyOptions opt;
        opt.scene_extent = uniform(rng, 5.0, 40.0);
        densify_and_prune(scene, anchors, st, opt, rng);
        for (const auto& a : anchors) {
            ASSERT_LT(a.gaussian_index, scene.size());
            EXPECT_GE(sigmoid(scene.opacity_logits[a.gaussian_index]), opt.min_opacity);
        }
    }
}
