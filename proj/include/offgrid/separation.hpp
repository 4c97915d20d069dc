#pragma once

#include "offgrid/certificates.hpp"
#include "offgrid/kernel.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace offgrid {

/// A_{T,l_inf}(theta): max of six l_inf operator norms of kernel-derivative matrices.
double coherence(const KernelContext& ctx, const std::vector<double>& thetas);

struct SeparationQuery {
    enum class Strategy { equispaced, random_restarts };
    double u = 0.0;
    int s = 2;
    Strategy strategy = Strategy::random_restarts;
    double lower = 0.05;  // search bounds in d units
    double upper = std::numeric_limits<double>::quiet_NaN();  // NaN: whole window
    double tolerance = 1e-2;
    int restarts = 32;
    std::uint64_t seed = 2024;
    void validate() const;
};

struct DeltaResult {
    double delta = 0.0;             // estimate of delta_T(u, s), in d units
    double delta_equispaced = 0.0;  // same search using the equispaced candidate only
    std::vector<double> worst_config;  // config maximizing coherence just below delta
    double worst_coherence = 0.0;
    int bisection_steps = 0;
    bool heuristic = true;  // the inner sup over configurations is not certified
};

/// Heuristic sup of the coherence over s-point configs with pairwise d-gaps > delta.
/// Returns -inf when no such configuration fits in Theta_T.
double max_coherence(const KernelContext& ctx, double delta, int s, bool restarts, int n_restarts,
                     std::uint64_t seed, std::vector<double>* argmax = nullptr);

DeltaResult delta(const KernelContext& ctx, const SeparationQuery& q);

/// psi_s(delta) = 2M int_0^{s/2+1} exp(-t^2 delta^2 / 4) dt (adaptive quadrature).
double psi_s(double M, double delta, int s);

struct PsiBound {
    double uniform = 0.0;  // 2 sqrt(pi) M / u
    double finite = 0.0;   // psi_s^{-1}(u), 0 when u > M (s + 2)
    double residual = 0.0; // |psi_s(finite) - u|
};

PsiBound psi_upper_bound(double M, double u, int s);

/// max_{0<=i<=3} sup_t |P_i(t)| exp(-t^2/4) for the gaussian profile.
double gaussian_envelope_constant();

struct EmpiricalSeparation {
    double gap_d = 0.0;        // smallest passing equispaced gap, d units
    double gap_euclidean = 0.0;
    bool found = false;
    std::vector<double> support;
    std::string failure_below;  // clause failing just below the threshold
    int steps = 0;
};

struct EmpiricalSeparationOptions {
    double lower = 0.0;  // 0: use 2r
    double upper = 12.0;
    double tolerance = 1e-2;
    VerifyOptions verify;
};

EmpiricalSeparation empirical_min_separation(const KernelContext& ctx, int s, double r,
                                             const TheoreticalConstants& constants,
                                             const EmpiricalSeparationOptions& opt = {});

/// Equispaced support in the G-coordinate with d-gap `gap`, centred in Theta_T.
std::vector<double> equispaced_support(const KernelContext& ctx, int s, double gap);

}  // namespace offgrid
