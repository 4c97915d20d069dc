#include "offgrid/dictionary.hpp"

#include "offgrid/errors.hpp"

#include <cmath>
#include <numbers>

namespace offgrid {

std::string to_string(Family f) {
    switch (f) {
        case Family::gaussian_translate: return "gaussian_translate";
        case Family::cauchy_translate: return "cauchy_translate";
        case Family::sinc_translate: return "sinc_translate";
        case Family::exp_scale: return "exp_scale";
    }
    return "unknown";
}

Family family_from_string(const std::string& name) {
    if (name == "gaussian_translate" || name == "gaussian") return Family::gaussian_translate;
    if (name == "cauchy_translate" || name == "cauchy") return Family::cauchy_translate;
    if (name == "sinc_translate" || name == "sinc") return Family::sinc_translate;
    if (name == "exp_scale") return Family::exp_scale;
    if (name == "laplace" || name == "laplace_translate")
        throw ConfigError("laplace kernel is not C^3 and is not supported");
    throw ConfigError("unknown dictionary family: " + name);
}

DictionarySpec DictionarySpec::gaussian(double sigma0) {
    return {Family::gaussian_translate, sigma0};
}
DictionarySpec DictionarySpec::cauchy(double sigma0) { return {Family::cauchy_translate, sigma0}; }
DictionarySpec DictionarySpec::sinc(double sigma0) { return {Family::sinc_translate, sigma0}; }
DictionarySpec DictionarySpec::exp_scale(double lo, double hi) {
    return {Family::exp_scale, 1.0, lo, hi};
}

void DictionarySpec::validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("dictionary scale must be > 0");
    if (!(theta_hi > theta_lo)) throw DomainError("dictionary domain is empty");
    if (family == Family::exp_scale && theta_lo < 0.0)
        throw DomainError("exp_scale requires a domain inside (0, inf)");
}

namespace {

constexpr double pi = std::numbers::pi;

// f(y) = sin(y)/y and derivatives, by series for |y| < 1.
double sinc_series(double y, int i) {
    double sum = 0.0;
    double fact = 1.0;  // (2n+1)!
    for (int n = 0; n <= 12; ++n) {
        if (n > 0) fact *= (2.0 * n) * (2.0 * n + 1.0);
        const int p = 2 * n;
        if (p < i) continue;
        double falling = 1.0;  // p (p-1) ... (p-i+1)
        for (int k = 0; k < i; ++k) falling *= static_cast<double>(p - k);
        const double sign = (n % 2 == 0) ? 1.0 : -1.0;
        sum += sign * falling * std::pow(y, p - i) / fact;
    }
    return sum;
}

double sinc_closed(double y, int i) {
    const double s = std::sin(y), c = std::cos(y);
    const double y2 = y * y;
    switch (i) {
        case 0: return s / y;
        case 1: return c / y - s / y2;
        case 2: return -s / y - 2.0 * c / y2 + 2.0 * s / (y2 * y);
        default: return -c / y + 3.0 * s / y2 + 6.0 * c / (y2 * y) - 6.0 * s / (y2 * y2);
    }
}

}  // namespace

double profile_deriv(Family f, double x, int i) {
    switch (f) {
        case Family::gaussian_translate: {
            const double e = std::exp(-0.5 * x * x);
            switch (i) {
                case 0: return e;
                case 1: return -x * e;
                case 2: return (x * x - 1.0) * e;
                default: return (3.0 * x - x * x * x) * e;
            }
        }
        case Family::cauchy_translate: {
            const double q = 1.0 / (1.0 + x * x);
            switch (i) {
                case 0: return q;
                case 1: return -2.0 * x * q * q;
                case 2: return (6.0 * x * x - 2.0) * q * q * q;
                default: return 24.0 * x * (1.0 - x * x) * q * q * q * q;
            }
        }
        case Family::sinc_translate: {
            const double y = pi * x;
            const double f_i = std::abs(y) < 1.0 ? sinc_series(y, i) : sinc_closed(y, i);
            return std::pow(pi, i) * f_i;
        }
        case Family::exp_scale: break;
    }
    throw DomainError("profile_deriv: not a translated family");
}

double feature_value(const DictionarySpec& d, double theta, double t, int i) {
    if (i < 0 || i > 3) throw DomainError("feature derivative order must be in 0..3");
    if (!d.contains(theta)) throw DomainError("theta outside the dictionary domain");
    if (d.family == Family::exp_scale) return std::pow(-t, i) * std::exp(-theta * t);
    const double x = (t - theta) / d.scale;
    return std::pow(-1.0 / d.scale, i) * profile_deriv(d.family, x, i);
}

void feature_derivs(const DictionarySpec& d, double theta, const std::vector<double>& t,
                    std::array<std::vector<double>, 4>& out) {
    if (!d.contains(theta)) throw DomainError("theta outside the dictionary domain");
    const std::size_t n = t.size();
    for (auto& v : out) v.resize(n);
    if (d.family == Family::exp_scale) {
        for (std::size_t j = 0; j < n; ++j) {
            const double e = std::exp(-theta * t[j]);
            out[0][j] = e;
            out[1][j] = -t[j] * e;
            out[2][j] = t[j] * t[j] * e;
            out[3][j] = -t[j] * t[j] * t[j] * e;
        }
        return;
    }
    const double s = 1.0 / d.scale;
    if (d.family == Family::gaussian_translate) {
        // Single exponential per point.
        for (std::size_t j = 0; j < n; ++j) {
            const double x = (t[j] - theta) * s;
            const double e = std::exp(-0.5 * x * x);
            out[0][j] = e;
            out[1][j] = s * x * e;
            out[2][j] = s * s * (x * x - 1.0) * e;
            out[3][j] = -s * s * s * (3.0 * x - x * x * x) * e;
        }
        return;
    }
    for (std::size_t j = 0; j < n; ++j) {
        const double x = (t[j] - theta) * s;
        double sc = 1.0;
        for (int i = 0; i < 4; ++i) {
            out[i][j] = sc * profile_deriv(d.family, x, i);
            sc *= -s;
        }
    }
}

HilbertVector feature_deriv(const DictionarySpec& d, double theta, int i, const GridMeasure& m) {
    if (i < 0 || i > 3) throw DomainError("feature derivative order must be in 0..3");
    std::array<std::vector<double>, 4> all;
    feature_derivs(d, theta, m.points(), all);
    return HilbertVector(m, std::move(all[i]));
}

RegularityReport check_regularity(const DictionarySpec& d, const GridMeasure& m,
                                  const std::vector<double>& theta_probe, double tolerance) {
    RegularityReport rep;
    rep.tolerance = tolerance;
    rep.pass = !theta_probe.empty();
    for (double th : theta_probe) {
        RegularityProbe p;
        p.theta = th;
        if (d.contains(th)) {
            const auto f = feature_deriv(d, th, 0, m);
            const auto df = feature_deriv(d, th, 1, m);
            const double a = inner(f, f, m), b = inner(f, df, m), c = inner(df, df, m);
            p.norm_phi = std::sqrt(a);
            p.norm_dphi = std::sqrt(c);
            if (a > 0.0 && c > 0.0) p.normalized_gram_det = 1.0 - (b / a) * (b / c);
            p.pass = p.norm_phi > 0.0 && p.norm_dphi > 0.0 && p.normalized_gram_det > tolerance;
        }
        rep.pass = rep.pass && p.pass;
        rep.probes.push_back(p);
    }
    return rep;
}

}  // namespace offgrid
