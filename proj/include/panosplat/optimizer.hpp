#pragma once

// Adam over the parameter groups of a Gaussian scene.

#include "panosplat/gaussian.hpp"

#include <cstdint>
#include <vector>

namespace panosplat {

struct LearningRates {
    double position = 1.6e-4;
    double position_final = 1.6e-6;
    /// Multiplies both position rates; the trainer sets it to the scene extent.
    double position_scale = 1.0;
    double sh = 2.5e-3;
    double opacity = 5e-2;
    double scale = 5e-3;
    double rotation = 1e-3;

    /// Position rate decayed log-linearly from `position` to `position_final` over `total` steps.
    [[nodiscard]] double position_at(std::int64_t step, std::int64_t total) const;
    [[nodiscard]] double rate(ParamGroup g) const;
};

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;
};

struct StepReport {
    std::size_t skipped_nonfinite = 0;
};

class Adam {
public:
    Adam() = default;
    Adam(const GaussianScene& like, AdamOptions opt = {});

    /// One update. `position_lr` overrides the position rate (already scaled). Entries with a
    /// non-finite gradient keep their value and moments; they are counted in the report.
    /// Quaternions are renormalized afterwards.
    StepReport step(GaussianScene& scene, const GaussianScene& grads, const LearningRates& lr,
                     double position_lr);

    /// Rebuilds the moments after the scene changed: new Gaussian i takes the moments of old
    /// Gaussian source[i], or zeros when source[i] < 0.
    void remap(const std::vector<std::int64_t>& source);

    /// Restores saved moments; both must have the shape of the scene being optimized.
    void set_moments(GaussianScene m, GaussianScene v);
    [[nodiscard]] const GaussianScene& first_moment() const { return m_; }
    [[nodiscard]] const GaussianScene& second_moment() const { return v_; }

    [[nodiscard]] std::int64_t steps() const { return steps_; }
    void set_steps(std::int64_t s) { steps_ = s; }
    [[nodiscard]] const AdamOptions& options() const { return opt_; }
    [[nodiscard]] std::size_t size() const { return m_.size(); }

private:
    AdamOptions opt_;
    GaussianScene m_, v_;
    std::int64_t steps_ = 0;
};

} // namespace panosplat
