#include "panosplat/camera.hpp"
#include "panosplat/error.hpp"
#include "panosplat/projection.hpp"
#include "test_random.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>
#include <random>

namespace panosplat {
namespace {

using testing::random_quaternion;
using testing::random_unit;
using testing::uniform;

constexpr double kPi = std::numbers::pi;

// Central finite differences of tangent_project with mu' held fixed.
Mat3 fd_jacobian(const Vec3& t, const Vec3& mu_prime, double h) {
    Mat3 j;
    for (int k = 0; k < 3; ++k) {
        Vec3 tp = t, tm = t;
        tp[k] += h;
        tm[k] -= h;
        j.col(k) = (tangent_project(tp, mu_prime) - tangent_project(tm, mu_prime)) / (2.0 * h);
    }
    return j;
}

TEST(BuildCovariance, IdentityScaleAndRotation) {
    const Mat3 s = build_covariance(Vec3(1, 1, 1), Vec4(1, 0, 0, 0));
    EXPECT_TRUE(s.isApprox(Mat3::Identity(), 1e-15));
}

TEST(BuildCovariance, AxisScale) {
    const Mat3 s = build_covariance(Vec3(2, 1, 1), Vec4(1, 0, 0, 0));
    EXPECT_TRUE(s.isApprox(Vec3(4, 1, 1).asDiagonal().toDenseMatrix(), 1e-15));
}

TEST(BuildCovariance, EigenvaluesAreSquaredScales) {
    std::mt19937_64 rng(7);
    for (int it = 0; it < 200; ++it) {
        const Vec3 scale(uniform(rng, 0.05, 3), uniform(rng, 0.05, 3), uniform(rng, 0.05, 3));
        const Mat3 s = build_covariance(scale, random_quaternion(rng));
        EXPECT_LT((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-14);
        Eigen::SelfAdjointEigenSolver<Mat3> es(s);
        Vec3 ev = es.eigenvalues();
        Vec3 sq = scale.cwiseProduct(scale);
        std::sort(ev.data(), ev.data() + 3);
        std::sort(sq.data(), sq.data() + 3);
        EXPECT_LT((ev - sq).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + sq.maxCoeff()));
    }
}

TEST(BuildCovariance, RejectsNonFinite) {
    EXPECT_THROW(build_covariance(Vec3(1, std::nan(""), 1), Vec4(1, 0, 0, 0)), InvalidParameterError);
    EXPECT_THROW(build_covariance(Vec3(1, 1, 1), Vec4(INFINITY, 0, 0, 0)), InvalidParameterError);
}

TEST(ProjectToSphere, Examples) {
    EXPECT_TRUE(project_to_sphere(Vec3(0, 0, 2)).isApprox(Vec3(0, 0, 1)));
    EXPECT_TRUE(project_to_sphere(Vec3(3, 4, 0)).isApprox(Vec3(0.6, 0.8, 0)));
    EXPECT_THROW(project_to_sphere(Vec3(0, 0, 1e-12)), GaussianAtCameraError);
}

TEST(TangentProject, Examples) {
    EXPECT_TRUE(tangent_project(Vec3(0, 0, 2), Vec3(0, 0, 1)).isApprox(Vec3(0, 0, 1)));
    EXPECT_TRUE(tangent_project(Vec3(1, 0, 2), Vec3(0, 0, 1)).isApprox(Vec3(0.5, 0, 1)));
    EXPECT_THROW(tangent_project(Vec3(0, 0, -1), Vec3(0, 0, 1)), BehindTangentPlaneError);
}

TEST(TangentProject, PlaneMembershipAndRayHomogeneity) {
    std::mt19937_64 rng(11);
    for (int it = 0; it < 1000; ++it) {
        const Vec3 mu = random_unit(rng);
        Vec3 t = random_unit(rng) * uniform(rng, 0.1, 10.0);
        if (mu.dot(t) < 0.05) t = -t;
        if (mu.dot(t) < 0.05) continue;
        const Vec3 p = tangent_project(t, mu);
        EXPECT_NEAR(mu.dot(p - mu), 0.0, 1e-9);
        const double lambda = uniform(rng, 0.01, 100.0);
        EXPECT_LT((tangent_project(lambda * t, mu) - p).norm(), 1e-9);
    }
}

TEST(TangentJacobian, OnAxisExample) {
    const Mat3 j = tangent_jacobian(Vec3(0, 0, 1), Vec3(0, 0, 1));
    EXPECT_TRUE(j.isApprox(Vec3(1, 1, 0).asDiagonal().toDenseMatrix(), 1e-15));
    EXPECT_LT((fd_jacobian(Vec3(0, 0, 1), Vec3(0, 0, 1), 1e-5) - j).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(TangentJacobian, AnnihilatesTheRay) {
    std::mt19937_64 rng(3);
    for (int it = 0; it < 500; ++it) {
        const Vec3 mu = random_unit(rng);
        const Vec3 t = (mu + 0.5 * random_unit(rng)) * uniform(rng, 0.2, 8.0);
        if (mu.dot(t) < 0.05) continue;
        EXPECT_LT((tangent_jacobian(t, mu) * t).norm(), 1e-9);
    }
}

TEST(TangentJacobian, MatchesFiniteDifferences) {
    std::mt19937_64 rng(5);
    double worst = 0.0;
    int checked = 0;
    while (checked < 100) {
        const Vec3 mu = random_unit(rng);
        const Vec3 t = (mu + 0.6 * random_unit(rng)) * uniform(rng, 0.5, 5.0);
        if (mu.dot(t) < 0.2) continue;
        const Mat3 j = tangent_jacobian(t, mu);
        const Mat3 fd = fd_jacobian(t, mu, 1e-5);
        worst = std::max(worst, (j - fd).cwiseAbs().maxCoeff() / std::max(1.0, j.cwiseAbs().maxCoeff()));
        ++checked;
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(TangentFrame, OrthonormalEverywhereIncludingPoles) {
    std::mt19937_64 rng(13);
    std::vector<Vec3> dirs = {Vec3(0, -1, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1e-9, 1, 0).normalized()};
    for (int i = 0; i < 500; ++i) dirs.push_back(random_unit(rng));
    for (const Vec3& m : dirs) {
        const auto f = make_tangent_frame(m);
        EXPECT_NEAR(f.mu_prime.dot(f.basis_u), 0.0, 1e-9);
        EXPECT_NEAR(f.mu_prime.dot(f.basis_v), 0.0, 1e-9);
        EXPECT_NEAR(f.basis_u.dot(f.basis_v), 0.0, 1e-9);
        EXPECT_NEAR(f.basis_u.norm(), 1.0, 1e-9);
        EXPECT_NEAR(f.basis_v.norm(), 1.0, 1e-9);
    }
}

TEST(SplatCovariance, IdentityOnAxis) {
    const Vec3 t(0, 0, 1), mu(0, 0, 1);
    TangentFrame f;
    f.mu_prime = mu;
    f.basis_u = Vec3(1, 0, 0);
    f.basis_v = Vec3(0, 1, 0);
    const double floor = 0.25;
    const Mat2 c = splat_covariance(Mat3::Identity(), Mat3::Identity(), tangent_jacobian(t, mu), f, floor);
    EXPECT_TRUE(c.isApprox(Mat2::Identity() * (1.0 + floor), 1e-14));
}

TEST(SplatCovariance, DegenerateGaussianGivesFloor) {
    const auto f = make_tangent_frame(Vec3(0, 0, 1));
    const Mat2 c = splat_covariance(Mat3::Zero(), Mat3::Identity(), tangent_jacobian(Vec3(0, 0, 3), f.mu_prime), f, 0.1);
    EXPECT_TRUE(c.isApprox(Mat2::Identity() * 0.1, 1e-15));
}

TEST(SplatCovariance, EigenvaluesAboveFloor) {
    std::mt19937_64 rng(17);
    const double floor = 1e-3;
    for (int it = 0; it < 300; ++it) {
        const Vec3 t = random_unit(rng) * uniform(rng, 0.5, 6);
        const Vec3 mu = t.normalized();
        const Mat3 sigma = build_covariance(Vec3(uniform(rng, 1e-4, 1), uniform(rng, 1e-4, 1), uniform(rng, 1e-4, 1)),
                                            random_quaternion(rng));
        const Mat3 w = quaternion_to_rotation(random_quaternion(rng));
        const Mat2 c = splat_covariance(sigma, w, tangent_jacobian(t, mu), make_tangent_frame(mu), floor);
        Eigen::SelfAdjointEigenSolver<Mat2> es(c);
        EXPECT_GE(es.eigenvalues().minCoeff(), floor * (1.0 - 1e-12));
    }
}

// Monte-Carlo oracle: push samples of a small world-space Gaussian through the exact
// tangent projection and compare the empirical tangent-plane covariance.
TEST(SplatCovariance, MatchesMonteCarloPropagation) {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (int trial = 0; trial < 3; ++trial) {
        const Mat3 w = quaternion_to_rotation(random_quaternion(rng));
        const Vec3 d = random_unit(rng) * 0.3;
        const Vec3 mu_world = random_unit(rng) * 2.5;
        const Vec3 scale(uniform(rng, 0.005, 0.02), uniform(rng, 0.005, 0.02), uniform(rng, 0.005, 0.02));
        const Vec4 q = random_quaternion(rng);
        const Mat3 sigma = build_covariance(scale, q);
        const Vec3 tk = w * mu_world + d;
        const Vec3 mp = tk.normalized();
        const auto f = make_tangent_frame(mp);
        const Mat2 analytic = splat_covariance(sigma, w, tangent_jacobian(tk, mp), f, 0.0);

        const Mat3 l = quaternion_to_rotation(q) * scale.asDiagonal();
        constexpr int kSamples = 1'000'000;
        Vec2 mean = Vec2::Zero();
        Mat2 second = Mat2::Zero();
        for (int s = 0; s < kSamples; ++s) {
            const Vec3 x = mu_world + l * Vec3(n01(rng), n01(rng), n01(rng));
            const Vec3 tp = tangent_project(w * x + d, mp) - mp;
            const Vec2 uv(f.basis_u.dot(tp), f.basis_v.dot(tp));
            mean += uv;
            second += uv * uv.transpose();
        }
        mean /= kSamples;
        const Mat2 empirical = second / kSamples - mean * mean.transpose();
        EXPECT_LT((empirical - analytic).cwiseAbs().maxCoeff(), 1e-4);
        EXPECT_LT((empirical - analytic).norm() / analytic.norm(), 1e-2);
    }
}

TEST(SphericalMap, Examples) {
    auto a = spherical_map(Vec3(0, 0, 1));
    EXPECT_DOUBLE_EQ(a.theta, 0.0);
    EXPECT_DOUBLE_EQ(a.phi, 0.0);
    a = spherical_map(Vec3(1, 0, 0));
    EXPECT_DOUBLE_EQ(a.theta, 0.0);
    EXPECT_DOUBLE_EQ(a.phi, kPi / 2);
    a = spherical_map(Vec3(0, -1, 1));
    EXPECT_DOUBLE_EQ(a.theta, kPi / 4);
    EXPECT_DOUBLE_EQ(a.phi, 0.0);
    a = spherical_map(Vec3(0, 2, 0));
    EXPECT_DOUBLE_EQ(a.theta, -kPi / 2);
    EXPECT_DOUBLE_EQ(a.phi, 0.0);
    EXPECT_DOUBLE_EQ(spherical_map(Vec3(-0.0, 0, -1)).phi, kPi);
}

TEST(AnglesToPixel, Examples) {
    auto p = angles_to_pixel(0, 0, 512, 1024);
    EXPECT_DOUBLE_EQ(p.row, 256);
    EXPECT_DOUBLE_EQ(p.col, 512);
    p = angles_to_pixel(kPi / 2, 0, 512, 1024);
    EXPECT_DOUBLE_EQ(p.row, 0);
    EXPECT_DOUBLE_EQ(p.col, 512);
    p = angles_to_pixel(0, kPi, 512, 1024);
    EXPECT_DOUBLE_EQ(p.row, 256);
    EXPECT_DOUBLE_EQ(std::fmod(p.col, 1024.0), 0.0);
}

TEST(PixelToDirection, Examples) {
    EXPECT_LT((pixel_to_direction(256, 512, 512, 1024) - Vec3(0, 0, 1)).norm(), 1e-15);
    EXPECT_LT((pixel_to_direction(0, 512, 512, 1024) - Vec3(0, -1, 0)).norm(), 1e-15);
}

TEST(PixelToDirection, RoundTripRandomDirections) {
    std::mt19937_64 rng(29);
    for (int i = 0; i < 1000; ++i) {
        const Vec3 d = random_unit(rng);
        const auto a = spherical_map(d);
        const auto p = angles_to_pixel(a.theta, a.phi, 512, 1024);
        const Vec3 back = pixel_to_direction(p.row, p.col, 512, 1024);
        EXPECT_NEAR(back.norm(), 1.0, 1e-12);
        EXPECT_LT((back - d).norm(), 1e-9);
    }
}

TEST(PixelToDirection, PixelCentersAreBijectiveAwayFromPoles) {
    const int h = 64, w = 128;
    double worst = 0.0;
    for (int r = 1; r < h - 1; ++r) {
        for (int c = 0; c < w; ++c) {
            const Vec3 d = pixel_to_direction(r + 0.5, c + 0.5, h, w);
            const auto a = spherical_map(d);
            const auto p = angles_to_pixel(a.theta, a.phi, h, w);
            worst = std::max({worst, std::abs(p.row - (r + 0.5)), std::abs(p.col - (c + 0.5))});
        }
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(SphericalMap, YawShiftsLongitude) {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 500; ++i) {
        const Vec3 d = random_unit(rng);
        if (std::hypot(d.x(), d.z()) < 1e-3) continue;
        const double delta = uniform(rng, -kPi, kPi);
        const double before = spherical_map(d).phi;
        const double after = spherical_map(yaw_rotation(delta) * d).phi;
        double diff = std::remainder(after - before - delta, 2.0 * kPi);
        EXPECT_NEAR(diff, 0.0, 1e-9);
        EXPECT_NEAR(spherical_map(yaw_rotation(delta) * d).theta, spherical_map(d).theta, 1e-12);
    }
}

TEST(PanoramaCamera, Validation) {
    PanoramaCamera cam;
    EXPECT_NO_THROW(cam.validate());
    cam.width = 1000;
    EXPECT_THROW(cam.validate(), InvalidParameterError);
    cam.width = 1024;
    cam.rotation(0, 0) = 1.01;
    EXPECT_THROW(cam.validate(), InvalidParameterError);
    cam.rotation = Vec3(1, 1, -1).asDiagonal();
    EXPECT_THROW(cam.validate(), InvalidParameterError);
}

} // namespace
} // namespace panosplat
