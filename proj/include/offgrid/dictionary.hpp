#pragma once

#include "offgrid/measure.hpp"

#include <array>
#include <limits>
#include <string>
#include <vector>

namespace offgrid {

enum class Family { gaussian_translate, cauchy_translate, sinc_translate, exp_scale };

std::string to_string(Family f);
Family family_from_string(const std::string& name);

/// Parametric family phi(theta) with closed-form theta-derivatives up to order 3.
/// Translated families: phi(theta)(t) = k((t - theta)/scale).
/// exp_scale: phi(theta)(t) = exp(-theta t), theta > 0.
struct DictionarySpec {
    Family family = Family::gaussian_translate;
    double scale = 1.0;
    double theta_lo = -std::numeric_limits<double>::infinity();
    double theta_hi = std::numeric_limits<double>::infinity();

    static DictionarySpec gaussian(double sigma0);
    static DictionarySpec cauchy(double sigma0);
    static DictionarySpec sinc(double sigma0);
    static DictionarySpec exp_scale(double lo = 0.0, double hi = std::numeric_limits<double>::infinity());

    bool translated() const { return family != Family::exp_scale; }
    /// Throws if the invariants are broken.
    void validate() const;
    bool contains(double theta) const { return theta > theta_lo && theta < theta_hi; }
};

/// d^i/dtheta^i phi(theta)(t), i in 0..3.
double feature_value(const DictionarySpec& d, double theta, double t, int i);

/// All four derivative orders at every point of `t`. out[i][j] = d^i phi(theta)(t_j).
void feature_derivs(const DictionarySpec& d, double theta, const std::vector<double>& t,
                    std::array<std::vector<double>, 4>& out);

HilbertVector feature_deriv(const DictionarySpec& d, double theta, int i, const GridMeasure& m);

/// Reference profile k and its derivatives for translated families (x = (t-theta)/scale).
double profile_deriv(Family f, double x, int i);

struct RegularityProbe {
    double theta = 0.0;
    double norm_phi = 0.0;
    double norm_dphi = 0.0;
    /// det Gram(phi, dphi) / (|phi|^2 |dphi|^2), in [0, 1].
    double normalized_gram_det = 0.0;
    bool pass = false;
};

struct RegularityReport {
    std::vector<RegularityProbe> probes;
    double tolerance = 1e-10;
    bool pass = false;
};

RegularityReport check_regularity(const DictionarySpec& d, const GridMeasure& m,
                                  const std::vector<double>& theta_probe, double tolerance = 1e-10);

}  // namespace offgrid
