#pragma once

#include "offgrid/estimator.hpp"
#include "offgrid/kernel.hpp"
#include "offgrid/noise.hpp"

#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace offgrid {

/// Regular grid over [a_T, b_T] with Theta_T = [(1 - eps) a_T, (1 - eps) b_T].
/// Translated families default to the symmetric window b_T = sigma0 sqrt(2 log T) T^growth.
struct ScenarioSpec {
    Family family = Family::gaussian_translate;
    double sigma0 = 1.0;
    std::size_t T = 1024;
    double shrinkage = 0.1;
    double window_growth = 0.1;
    // Explicit grid interval and parameter window; NaN selects the rules above.
    double a = std::numeric_limits<double>::quiet_NaN();
    double b = std::numeric_limits<double>::quiet_NaN();
    double theta_lo = std::numeric_limits<double>::quiet_NaN();
    double theta_hi = std::numeric_limits<double>::quiet_NaN();

    void validate() const;
};

double window_half_width(std::size_t T, double sigma0, double growth);

/// 2 Delta_T / sigma0 + sqrt(pi) exp(-eps^2 b_T^2 / (2 sigma0^2)).
double approximation_gamma(const ScenarioSpec& spec);

struct Scenario {
    ScenarioSpec spec;
    double a = 0.0, b = 0.0;
    MeasurePtr measure;
    KernelContext ctx;
    /// Lebesgue limit over the same window (gaussian and exp_scale only).
    std::optional<KernelContext> limit;

    double delta() const { return measure->weights().front(); }
};

Scenario make_scenario(const ScenarioSpec& spec);

/// Truth with supports equispaced in d (centred in Theta_T) and the given amplitudes.
Truth equispaced_truth(const KernelContext& ctx, const std::vector<double>& beta, double gap);

/// y = sum beta*_k phi_T(theta*_k) + w with w drawn from `noise` (skipped when sigma = 0).
Observation make_observation(const KernelContext& ctx, const Truth& truth, const NoiseSampler* noise,
                             std::mt19937_64& rng);

}  // namespace offgrid
