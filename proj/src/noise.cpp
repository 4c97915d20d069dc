#include "offgrid/noise.hpp"

#include "offgrid/errors.hpp"
#include "offgrid/parallel_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace offgrid {

NoiseModel NoiseModel::iid(double sigma, std::uint64_t seed) {
    NoiseModel nm;
    nm.variant = Variant::iid;
    nm.sigma = sigma;
    nm.seed = seed;
    return nm;
}

NoiseModel NoiseModel::weighted_iid(double sigma, double delta, std::uint64_t seed) {
    NoiseModel nm = iid(sigma, seed);
    nm.variant = Variant::weighted_iid;
    nm.delta = delta;
    return nm;
}

NoiseModel NoiseModel::equicorrelated(double sigma1, double c, std::uint64_t seed) {
    NoiseModel nm = iid(sigma1, seed);
    nm.variant = Variant::correlated;
    nm.covariance = CovarianceKind::equicorrelated;
    nm.correlation = c;
    return nm;
}

NoiseModel NoiseModel::correlated_matrix(double sigma1, Eigen::MatrixXd cov, std::uint64_t seed) {
    NoiseModel nm = iid(sigma1, seed);
    nm.variant = Variant::correlated;
    nm.covariance = CovarianceKind::explicit_matrix;
    nm.matrix = std::move(cov);
    return nm;
}

NoiseModel NoiseModel::truncated_white(double sigma, std::size_t terms, std::uint64_t seed) {
    NoiseModel nm = iid(sigma, seed);
    nm.variant = Variant::series;
    nm.series_kind = SeriesKind::truncated_white;
    nm.basis_size = terms;
    return nm;
}

NoiseModel NoiseModel::brownian(double C_T, std::size_t terms, std::uint64_t seed) {
    NoiseModel nm = iid(1.0, seed);
    nm.variant = Variant::series;
    nm.series_kind = SeriesKind::brownian;
    nm.basis_size = terms;
    nm.brownian_scale = C_T;
    return nm;
}

std::string NoiseModel::name() const {
    switch (variant) {
        case Variant::iid: return "iid";
        case Variant::weighted_iid: return "weighted_iid";
        case Variant::correlated: return "correlated";
        case Variant::series:
            return series_kind == SeriesKind::brownian ? "series_brownian"
                   : series_kind == SeriesKind::truncated_white ? "series_truncated_white"
                                                                : "series_custom";
    }
    return "unknown";
}

std::vector<double> NoiseModel::series_weights() const {
    if (series_kind == SeriesKind::custom) return xi;
    std::vector<double> w(basis_size, 1.0);
    if (series_kind == SeriesKind::brownian) {
        const double pi = std::numbers::pi;
        for (std::size_t k = 0; k < basis_size; ++k) {
            const double d = (2.0 * k + 1.0) * pi;
            w[k] = 4.0 * brownian_scale * brownian_scale / (d * d);
        }
    }
    return w;
}

double NoiseModel::declared_sigma2() const {
    return variant == Variant::correlated ? 2.0 * sigma * sigma : sigma * sigma;
}

double NoiseModel::declared_delta(const GridMeasure& m) const {
    switch (variant) {
        case Variant::weighted_iid: return delta;
        case Variant::series: {
            const auto w = series_weights();
            return w.empty() ? 0.0 : *std::max_element(w.begin(), w.end());
        }
        default: return m.max_weight();
    }
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}
}  // namespace

std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL)));
}

NoiseSampler::NoiseSampler(NoiseModel nm, MeasurePtr m) : nm_(std::move(nm)), m_(std::move(m)) {
    if (!m_) throw ModelError("noise sampler needs a measure");
    if (nm_.sigma < 0.0) throw ModelError("noise sigma must be >= 0");
    const std::size_t T = m_->size();
    switch (nm_.variant) {
        case NoiseModel::Variant::iid: break;
        case NoiseModel::Variant::weighted_iid:
            if (!m_->uniform_weights() || std::abs(m_->weights()[0] - nm_.delta) > 1e-12 * nm_.delta)
                throw ModelError("weighted_iid: measure weights differ from the declared Delta_T");
            break;
        case NoiseModel::Variant::correlated: {
            const double s2 = nm_.sigma * nm_.sigma;
            if (nm_.covariance == NoiseModel::CovarianceKind::equicorrelated) {
                if (std::abs(nm_.correlation) > 1.0)
                    throw ModelError("equicorrelated: |c| must be <= 1 so that |offdiag| <= sigma^2/T");
                const double lam_perp = s2 * (1.0 - nm_.correlation / T);
                const double lam_one = lam_perp + nm_.correlation * s2;
                if (lam_perp < 0.0 || lam_one < -1e-12 * s2)
                    throw ModelError("equicorrelated covariance is not positive semidefinite");
                break;
            }
            const Eigen::MatrixXd& C = nm_.matrix;
            if (C.rows() != static_cast<Eigen::Index>(T) || C.cols() != C.rows())
                throw ModelError("covariance matrix size differs from the grid");
            for (Eigen::Index i = 0; i < C.rows(); ++i)
                for (Eigen::Index j = 0; j < C.cols(); ++j)
                    if (i != j && std::abs(C(i, j)) > s2 / T * (1.0 + 1e-12))
                        throw ModelError("covariance off-diagonal exceeds sigma^2/T");
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (C + C.transpose()));
            const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
            if (es.eigenvalues().minCoeff() < -1e-12 * scale)
                throw ModelError("covariance matrix is not positive semidefinite");
            const Eigen::VectorXd sq = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
            root_ = es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().transpose();
            break;
        }
        case NoiseModel::Variant::series: {
            const auto xi = nm_.series_weights();
            for (double x : xi)
                if (x < 0.0) throw ModelError("series weights must be nonnegative");
            const auto& t = m_->points();
            if (t.front() < 0.0 || t.back() > 1.0) throw ModelError("series noise lives on [0, 1]");
            basis_.resize(T, xi.size());
            const double pi = std::numbers::pi;
            for (std::size_t k = 0; k < xi.size(); ++k)
                for (std::size_t j = 0; j < T; ++j)
                    basis_(j, k) = nm_.sigma * std::sqrt(xi[k]) * std::sqrt(2.0) *
                                   std::sin((2.0 * k + 1.0) * pi * t[j] / 2.0);
            break;
        }
    }
}

HilbertVector NoiseSampler::sample(std::mt19937_64& rng) const {
    const std::size_t T = m_->size();
    std::normal_distribution<double> N01(0.0, 1.0);
    std::vector<double> w(T, 0.0);
    if (nm_.sigma == 0.0) return HilbertVector(*m_, std::move(w));
    switch (nm_.variant) {
        case NoiseModel::Variant::iid:
        case NoiseModel::Variant::weighted_iid:
            for (auto& x : w) x = nm_.sigma * N01(rng);
            break;
        case NoiseModel::Variant::correlated: {
            Eigen::VectorXd g(T);
            for (std::size_t j = 0; j < T; ++j) g(j) = N01(rng);
            if (nm_.covariance == NoiseModel::CovarianceKind::equicorrelated) {
                const double s2 = nm_.sigma * nm_.sigma;
                const double lam_perp = s2 * (1.0 - nm_.correlation / T);
                const double lam_one = std::max(0.0, lam_perp + nm_.correlation * s2);
                const double mean = g.mean();
                for (std::size_t j = 0; j < T; ++j)
                    w[j] = std::sqrt(lam_perp) * (g(j) - mean) + std::sqrt(lam_one) * mean;
            } else {
                const Eigen::VectorXd x = root_ * g;
                for (std::size_t j = 0; j < T; ++j) w[j] = x(j);
            }
            break;
        }
        case NoiseModel::Variant::series: {
            Eigen::VectorXd g(basis_.cols());
            for (Eigen::Index k = 0; k < g.size(); ++k) g(k) = N01(rng);
            const Eigen::VectorXd x = basis_ * g;
            for (std::size_t j = 0; j < T; ++j) w[j] = x(j);
            break;
        }
    }
    return HilbertVector(*m_, std::move(w));
}

double NoiseSampler::variance(const HilbertVector& f) const {
    const auto& wt = m_->weights();
    const std::size_t T = m_->size();
    Eigen::VectorXd a(T);
    for (std::size_t j = 0; j < T; ++j) a(j) = wt[j] * f[j];
    const double s2 = nm_.sigma * nm_.sigma;
    switch (nm_.variant) {
        case NoiseModel::Variant::iid:
        case NoiseModel::Variant::weighted_iid: return s2 * a.squaredNorm();
        case NoiseModel::Variant::correlated: {
            if (nm_.covariance == NoiseModel::CovarianceKind::explicit_matrix) return a.dot(nm_.matrix * a);
            const double sum = a.sum();
            return s2 * (1.0 - nm_.correlation / T) * a.squaredNorm() + nm_.correlation * s2 / T * sum * sum;
        }
        case NoiseModel::Variant::series: return (basis_.transpose() * a).squaredNorm();
    }
    return 0.0;
}

HilbertVector sample(const NoiseModel& nm, MeasurePtr m, std::mt19937_64& rng) {
    return NoiseSampler(nm, std::move(m)).sample(rng);
}

VarianceReport check_variance_bound(const NoiseModel& nm, MeasurePtr m,
                                    const std::vector<HilbertVector>& test_fns, std::size_t reps) {
    if (reps < 1000) throw DomainError("check_variance_bound needs at least 1000 replicates");
    const NoiseSampler sampler(nm, m);
    VarianceReport rep;
    rep.reps = reps;
    rep.sigma2 = nm.declared_sigma2();
    rep.delta = nm.declared_delta(*m);
    const std::size_t nf = test_fns.size();
    std::vector<double> vals(reps * nf);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(reps); ++r) {
        auto rng = replicate_rng(nm.seed, static_cast<std::uint64_t>(r));
        const HilbertVector w = sampler.sample(rng);
        for (std::size_t f = 0; f < nf; ++f) vals[r * nf + f] = inner(test_fns[f], w, *m);
    }
    // One-sided 99% allowance for a sample variance with reps - 1 degrees of freedom.
    constexpr double z99 = 2.3263478740408408;
    const double allowance = z99 * std::sqrt(2.0 / (reps - 1.0));
    rep.pass = true;
    for (std::size_t f = 0; f < nf; ++f) {
        double mean = 0.0;
        for (std::size_t r = 0; r < reps; ++r) mean += vals[r * nf + f];
        mean /= reps;
        double var = 0.0;
        for (std::size_t r = 0; r < reps; ++r) var += (vals[r * nf + f] - mean) * (vals[r * nf + f] - mean);
        var /= (reps - 1.0);
        VarianceCheck c;
        c.empirical = var;
        const double nf2 = inner(test_fns[f], test_fns[f], *m);
        c.bound = rep.sigma2 * rep.delta * nf2;
        const double ref = nm.sigma * nm.sigma * rep.delta * nf2;
        c.ratio = ref > 0.0 ? var / ref : 0.0;
        c.allowance = allowance;
        c.pass = var <= c.bound * (1.0 + allowance) + 1e-300;
        rep.pass = rep.pass && c.pass;
        rep.checks.push_back(c);
    }
    return rep;
}

double tail_bound(double C1, double C2, double sigma, double delta, double riemannian_length, double u) {
    if (!(u > 0.0)) return std::numeric_limits<double>::infinity();
    const double c = 2.0 * C2 + 1.0;
    const double lead = std::max(sigma * riemannian_length * std::sqrt(delta) / u, 1.0);
    return c * lead * std::exp(-u * u / (4.0 * sigma * sigma * delta * C1 * C1));
}

std::pair<double, double> tail_constants(int order, const LimitConstants& L) {
    switch (order) {
        case 0: return {1.0, 1.0};
        case 1: return {1.0, std::sqrt(2.0 * L.L22)};
        case 2: return {std::sqrt(2.0 * L.L22), std::sqrt(2.0 * L.L3)};
        default: throw DomainError("tail constants exist for orders 0..2");
    }
}

ExceedanceReport empirical_sup_exceedance(const KernelContext& ctx, const NoiseModel& nm, int order,
                                          const std::vector<double>& u_grid, std::size_t reps,
                                          const LimitConstants& L, double r) {
    if (ctx.is_limit()) throw DomainError("empirical_sup_exceedance needs a discrete context");
    if (reps < 500) throw DomainError("empirical_sup_exceedance needs at least 500 replicates");
    ExceedanceReport rep;
    rep.order = order;
    rep.u = u_grid;
    rep.reps = reps;
    std::tie(rep.C1, rep.C2) = tail_constants(order, L);
    rep.grid_step = r / 50.0;
    const auto grid = ctx.uniform_grid(rep.grid_step);
    rep.grid_points = grid.size();
    const auto fr = ctx.frames(grid);
    const RowMatrix Phi = ctx.covariant_matrix(fr, order);
    const MeasurePtr m = ctx.measure();
    const NoiseSampler sampler(nm, m);
    const std::size_t n = grid.size(), T = m->size();
    rep.sup_samples.resize(reps);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(reps); ++k) {
        auto rng = replicate_rng(nm.seed, static_cast<std::uint64_t>(k));
        const HilbertVector w = sampler.sample(rng);
        std::vector<double> ww(T), c(n);
        for (std::size_t j = 0; j < T; ++j) ww[j] = w[j] * m->weights()[j];
        kernels::row_dots_serial(Phi.data(), n, T, ww.data(), c.data());
        const std::size_t b = kernels::argmax_abs_serial(c.data(), n);
        double best = std::abs(c[b]);
        if (b > 0 && b + 1 < n) {
            // Parabola through the three neighbouring |values|.
            const double y0 = std::abs(c[b - 1]), y1 = best, y2 = std::abs(c[b + 1]);
            const double den = y0 - 2.0 * y1 + y2;
            if (den < 0.0) {
                const double t = 0.5 * (y0 - y2) / den;
                best = std::max(best, y1 - 0.25 * (y0 - y2) * t);
            }
        }
        rep.sup_samples[k] = best;
    }
    const double sigma = std::sqrt(nm.declared_sigma2());
    const double delta = nm.declared_delta(*m);
    rep.pass = true;
    double prev = 1.0;
    for (double u : u_grid) {
        std::size_t cnt = 0;
        for (double s : rep.sup_samples) cnt += s >= u;
        const double p = static_cast<double>(cnt) / reps;
        const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) / reps);
        const double bnd = std::min(1.0, tail_bound(rep.C1, rep.C2, sigma, delta, ctx.riemannian_length(), u));
        rep.empirical.push_back(p);
        rep.std_error.push_back(se);
        rep.bound.push_back(bnd);
        rep.pass = rep.pass && p <= bnd + 3.0 * se + 1e-15;
        prev = p;
    }
    (void)prev;
    return rep;
}

}  // namespace offgrid
