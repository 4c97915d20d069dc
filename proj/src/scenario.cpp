#include "offgrid/scenario.hpp"

#include "offgrid/errors.hpp"
#include "offgrid/separation.hpp"

#include <cmath>
#include <numbers>

namespace offgrid {

void ScenarioSpec::validate() const {
    if (!(sigma0 > 0.0)) throw ConfigError("scenario: sigma0 must be positive");
    if (T < 2) throw ConfigError("scenario: T must be >= 2");
    if (!(shrinkage > 0.0 && shrinkage < 1.0)) throw ConfigError("scenario: shrinkage must lie in (0, 1)");
    if (!(window_growth >= 0.0)) throw ConfigError("scenario: window growth must be >= 0");
    if (std::isnan(a) != std::isnan(b)) throw ConfigError("scenario: give both grid ends or neither");
    if (!std::isnan(a) && !(a < b)) throw ConfigError("scenario: grid interval must have a < b");
    if (std::isnan(theta_lo) != std::isnan(theta_hi))
        throw ConfigError("scenario: give both window ends or neither");
    if (!std::isnan(theta_lo) && !(theta_lo < theta_hi)) throw ConfigError("scenario: empty parameter window");
    if (family == Family::exp_scale && (std::isnan(a) || std::isnan(theta_lo)))
        throw ConfigError("scenario: exp_scale needs an explicit grid interval and parameter window");
}

double window_half_width(std::size_t T, double sigma0, double growth) {
    const double t = static_cast<double>(T);
    return sigma0 * std::sqrt(2.0 * std::log(t)) * std::pow(t, growth);
}

double approximation_gamma(const ScenarioSpec& spec) {
    const double b = window_half_width(spec.T, spec.sigma0, spec.window_growth);
    const double delta = 2.0 * b / static_cast<double>(spec.T);
    const double e = spec.shrinkage * b / spec.sigma0;
    return 2.0 * delta / spec.sigma0 + std::sqrt(std::numbers::pi) * std::exp(-0.5 * e * e);
}

Scenario make_scenario(const ScenarioSpec& spec) {
    spec.validate();
    double a = spec.a, b = spec.b;
    if (std::isnan(a)) {
        b = window_half_width(spec.T, spec.sigma0, spec.window_growth);
        a = -b;
    }
    const double lo = std::isnan(spec.theta_lo) ? (1.0 - spec.shrinkage) * a : spec.theta_lo;
    const double hi = std::isnan(spec.theta_hi) ? (1.0 - spec.shrinkage) * b : spec.theta_hi;
    DictionarySpec d;
    switch (spec.family) {
        case Family::gaussian_translate: d = DictionarySpec::gaussian(spec.sigma0); break;
        case Family::cauchy_translate: d = DictionarySpec::cauchy(spec.sigma0); break;
        case Family::sinc_translate: d = DictionarySpec::sinc(spec.sigma0); break;
        case Family::exp_scale: d = DictionarySpec::exp_scale(); break;
    }
    auto m = GridMeasure::regular(a, b, spec.T, to_string(spec.family) + "_T" + std::to_string(spec.T));
    std::optional<KernelContext> lim;
    if (spec.family == Family::gaussian_translate || spec.family == Family::exp_scale)
        lim = KernelContext::limit(d, lo, hi);
    return Scenario{spec, a, b, m, KernelContext::discrete(d, m, lo, hi), std::move(lim)};
}

Truth equispaced_truth(const KernelContext& ctx, const std::vector<double>& beta, double gap) {
    Truth t;
    t.beta = beta;
    t.theta = equispaced_support(ctx, static_cast<int>(beta.size()), gap);
    return t;
}

Observation make_observation(const KernelContext& ctx, const Truth& truth, const NoiseSampler* noise,
                             std::mt19937_64& rng) {
    Observation obs;
    obs.measure = ctx.measure();
    obs.truth = truth;
    obs.y = mixture(ctx, truth.beta, truth.theta);
    if (noise) {
        if (noise->measure().id() != obs.measure->id())
            throw AlignmentError("noise sampler lives on another measure");
        obs.y += noise->sample(rng);
        obs.sigma = std::sqrt(noise->model().declared_sigma2());
        obs.delta = noise->model().declared_delta(*obs.measure);
    }
    return obs;
}

}  // namespace offgrid
