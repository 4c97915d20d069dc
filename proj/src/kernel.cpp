#include "offgrid/kernel.hpp"

#include "offgrid/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace offgrid {

namespace {

constexpr double pi = std::numbers::pi;

double binom(int n, int k) {
    static const double table[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
    return table[n][k];
}

double factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

// 16 compensated weighted dot products in a single pass.
Eigen::Matrix4d gram4(const std::vector<double>& w, const std::array<std::vector<double>, 4>& a,
                      const std::array<std::vector<double>, 4>& b, bool symmetric) {
    CompensatedSum acc[4][4];
    const std::size_t n = w.size();
    for (std::size_t j = 0; j < n; ++j) {
        const double wj = w[j];
        for (int p = 0; p < 4; ++p) {
            const double ap = wj * a[p][j];
            for (int q = symmetric ? p : 0; q < 4; ++q) acc[p][q].add(ap * b[q][j]);
        }
    }
    Eigen::Matrix4d out;
    for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q)
            out(p, q) = (symmetric && q < p) ? acc[q][p].value() : acc[p][q].value();
    return out;
}

}  // namespace

double gaussian_poly(int n, double t) {
    // P_n = (-1)^n He_n, He_{n+1} = t He_n - n He_{n-1}.
    double he_prev = 1.0, he = t;
    if (n == 0) return 1.0;
    for (int k = 1; k < n; ++k) {
        const double next = t * he - k * he_prev;
        he_prev = he;
        he = next;
    }
    return (n % 2 == 0) ? he : -he;
}

LimitConstants LimitConstants::gaussian(double sigma0) {
    LimitConstants L;
    L.m_g = 1.0 / (2.0 * sigma0 * sigma0);
    L.L00 = 1.0;
    L.L10 = std::exp(-0.5);
    L.L11 = 1.0;
    L.L20 = 1.0;
    L.L21 = std::sqrt(18.0 - 6.0 * std::sqrt(6.0)) * std::exp(std::sqrt(1.5) - 1.5);
    L.L22 = 3.0;
    L.L3 = 15.0;
    return L;
}

KernelContext KernelContext::discrete(DictionarySpec d, MeasurePtr m, double lo, double hi,
                                      int probe_count) {
    d.validate();
    if (!m) throw DomainError("discrete kernel context needs a measure");
    if (!(hi > lo) || !d.contains(lo) || !d.contains(hi))
        throw DomainError("theta window must be a nonempty compact subset of the dictionary domain");
    KernelContext ctx;
    ctx.mode_ = Mode::discrete;
    ctx.dict_ = d;
    ctx.measure_ = std::move(m);
    ctx.lo_ = lo;
    ctx.hi_ = hi;
    probe_count = std::max(probe_count, 2);
    std::vector<double> probes(probe_count);
    for (int k = 0; k < probe_count; ++k)
        probes[k] = lo + (hi - lo) * k / static_cast<double>(probe_count - 1);
    const auto reg = check_regularity(d, *ctx.measure_, probes);
    if (!reg.pass) throw DegeneracyError("dictionary fails the regularity check on the theta window");
    std::vector<double> gs;
    for (double p : probes) gs.push_back(ctx.frame(p).g);
    std::nth_element(gs.begin(), gs.begin() + gs.size() / 2, gs.end());
    ctx.g_threshold_ = 1e-10 * gs[gs.size() / 2];
    ctx.build_coordinate();
    return ctx;
}

KernelContext KernelContext::limit(DictionarySpec d, double lo, double hi) {
    d.validate();
    if (d.family != Family::gaussian_translate && d.family != Family::exp_scale)
        throw DomainError("closed-form limit only available for gaussian_translate and exp_scale");
    if (d.family == Family::exp_scale && !(lo > 0.0))
        throw DomainError("exp_scale limit window must lie in (0, inf)");
    if (!(hi > lo)) throw DomainError("theta window must be nonempty");
    KernelContext ctx;
    ctx.mode_ = Mode::limit;
    ctx.dict_ = d;
    ctx.lo_ = lo;
    ctx.hi_ = hi;
    ctx.g_threshold_ = 0.0;
    ctx.build_coordinate();
    return ctx;
}

Eigen::Matrix4d KernelContext::limit_raw(double x, double y) const {
    Eigen::Matrix4d R;
    if (dict_.family == Family::gaussian_translate) {
        // R(d) = sqrt(pi) s exp(-d^2/(4 s^2)); d^a_x d^b_y R(x-y) = (-1)^b R^{(a+b)}(x-y).
        const double s = dict_.scale;
        const double c = std::sqrt(2.0) * s;
        const double u = (x - y) / c;
        const double e = std::sqrt(pi) * s * std::exp(-0.5 * u * u);
        double deriv[7];
        for (int n = 0; n <= 6; ++n) deriv[n] = e * gaussian_poly(n, u) / std::pow(c, n);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) R(a, b) = ((b % 2) ? -1.0 : 1.0) * deriv[a + b];
    } else {
        // <e^{-x t}, e^{-y t}> on (0, inf) = 1/(x+y).
        const double sxy = x + y;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                R(a, b) = (((a + b) % 2) ? -1.0 : 1.0) * factorial(a + b) / std::pow(sxy, a + b + 1);
    }
    return R;
}

void KernelContext::finish_frame(Frame& f, const Eigen::Matrix4d& S) const {
    const double a = S(0, 0);
    if (!(a > 0.0)) throw DegeneracyError("feature has zero norm");
    const double a1 = 2.0 * S(0, 1);
    const double a2 = 2.0 * S(1, 1) + 2.0 * S(0, 2);
    const double a3 = 6.0 * S(1, 2) + 2.0 * S(0, 3);
    const double r = 1.0 / a;
    const double q0 = std::sqrt(r);
    const double q1 = -0.5 * q0 * r * a1;
    const double q2 = 0.75 * q0 * r * r * a1 * a1 - 0.5 * q0 * r * a2;
    const double q3 = -15.0 / 8.0 * q0 * r * r * r * a1 * a1 * a1 + 9.0 / 4.0 * q0 * r * r * a1 * a2 -
                      0.5 * q0 * r * a3;
    const double q[4] = {q0, q1, q2, q3};
    Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
    for (int k = 0; k < 4; ++k)
        for (int m = 0; m <= k; ++m) Q(k, m) = binom(k, m) * q[k - m];
    const Eigen::Matrix4d N = Q * S * Q.transpose();
    f.g = N(1, 1);
    f.g_prime = 2.0 * N(1, 2);
    f.g_second = 2.0 * N(2, 2) + 2.0 * N(1, 3);
    if (!(f.g > g_threshold_) || !(f.g > 0.0)) {
        std::ostringstream msg;
        msg << "g_T(" << f.theta << ") = " << f.g << " below degeneracy threshold " << g_threshold_;
        throw DegeneracyError(msg.str());
    }
    const double g = f.g, gp = f.g_prime, gpp = f.g_second;
    const double gm12 = 1.0 / std::sqrt(g);
    Eigen::Matrix4d C = Eigen::Matrix4d::Zero();
    C(0, 0) = 1.0;
    C(1, 1) = gm12;
    C(2, 1) = -0.5 * gp / (g * g);
    C(2, 2) = 1.0 / g;
    C(3, 1) = gp * gp * gm12 / (g * g * g) - 0.5 * gpp * gm12 / (g * g);
    C(3, 2) = -1.5 * gp * gm12 / (g * g);
    C(3, 3) = gm12 / g;
    f.A = C * Q;
}

Frame KernelContext::frame(double theta) const {
    if (!dict_.contains(theta)) throw DomainError("theta outside the dictionary domain");
    Frame f;
    f.theta = theta;
    if (mode_ == Mode::limit) {
        finish_frame(f, limit_raw(theta, theta));
        return f;
    }
    feature_derivs(dict_, theta, measure_->points(), f.raw);
    finish_frame(f, gram4(measure_->weights(), f.raw, f.raw, true));
    return f;
}

std::vector<Frame> KernelContext::frames(const std::vector<double>& thetas) const {
    std::vector<Frame> out(thetas.size());
    std::string err;
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(thetas.size()); ++k) {
        try {
            out[k] = frame(thetas[k]);
        } catch (const std::exception& e) {
#pragma omp critical
            err = e.what();
        }
    }
    if (!err.empty()) throw DegeneracyError(err);
    return out;
}

Eigen::Matrix4d KernelContext::raw_gram(const Frame& a, const Frame& b) const {
    if (mode_ == Mode::limit) return limit_raw(a.theta, b.theta);
    return gram4(measure_->weights(), a.raw, b.raw, false);
}

Eigen::Matrix4d KernelContext::kernel_block(const Frame& a, const Frame& b) const {
    return a.A * raw_gram(a, b) * b.A.transpose();
}

double KernelContext::kernel_deriv(double theta, double theta2, int i, int j) const {
    if (i < 0 || i > 3 || j < 0 || j > 3) throw DomainError("kernel derivative orders must be in 0..3");
    const Frame a = frame(theta);
    const Frame b = theta2 == theta ? a : frame(theta2);
    return kernel_block(a, b)(i, j);
}

std::vector<double> KernelContext::covariant_values(const Frame& f, int i) const {
    if (mode_ != Mode::discrete) throw DomainError("covariant features need a discrete context");
    const std::size_t n = measure_->size();
    std::vector<double> v(n, 0.0);
    for (int m = 0; m < 4; ++m) {
        const double c = f.A(i, m);
        if (c == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) v[j] += c * f.raw[m][j];
    }
    return v;
}

HilbertVector KernelContext::covariant_feature(double theta, int i) const {
    if (i < 0 || i > 3) throw DomainError("covariant order must be in 0..3");
    return HilbertVector(*measure_, covariant_values(frame(theta), i));
}

RowMatrix KernelContext::covariant_matrix(const std::vector<Frame>& fr, int i) const {
    if (mode_ != Mode::discrete) throw DomainError("covariant features need a discrete context");
    const std::size_t n = measure_->size();
    RowMatrix M(fr.size(), n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(fr.size()); ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            double v = 0.0;
            for (int m = 0; m < 4; ++m) v += fr[k].A(i, m) * fr[k].raw[m][j];
            M(k, j) = v;
        }
    }
    return M;
}

Eigen::MatrixXd KernelContext::kernel_table(const std::vector<Frame>& a, const std::vector<Frame>& b,
                                            int i, int j) const {
    if (mode_ == Mode::discrete) {
        const Eigen::Map<const Eigen::VectorXd> w(measure_->weights().data(), measure_->size());
        RowMatrix Ma = covariant_matrix(a, i);
        Ma = Ma * w.asDiagonal();
        const RowMatrix Mb = covariant_matrix(b, j);
        return Ma * Mb.transpose();
    }
    Eigen::MatrixXd K(a.size(), b.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(a.size()); ++k)
        for (std::size_t l = 0; l < b.size(); ++l)
            K(k, l) = (a[k].A.row(i) * limit_raw(a[k].theta, b[l].theta) * b[l].A.row(j).transpose())(0, 0);
    return K;
}

void KernelContext::build_coordinate() {
    if (mode_ == Mode::limit) {
        length_ = coordinate(hi_);
        return;
    }
    // Nodes uniform in theta (translated families) or log theta (exp_scale).
    const bool logscale = dict_.family == Family::exp_scale;
    const double u0 = logscale ? std::log(lo_) : lo_;
    const double u1 = logscale ? std::log(hi_) : hi_;
    const double per_unit = logscale ? 64.0 : 16.0 / dict_.scale;
    const int n = std::clamp(static_cast<int>(std::ceil((u1 - u0) * per_unit)) + 1, 65, 4097);
    std::vector<double> x(n), y(n), dy(n);
    for (int k = 0; k < n; ++k) {
        const double u = u0 + (u1 - u0) * k / static_cast<double>(n - 1);
        x[k] = logscale ? std::exp(u) : u;
    }
    x.front() = lo_;
    x.back() = hi_;
    std::vector<double> sq(n);
    const auto node_frames = frames(x);
    for (int k = 0; k < n; ++k) dy[k] = std::sqrt(node_frames[k].g);
    // Five-point Gauss-Legendre per panel.
    static const double gx[5] = {0.0, 0.5384693101056831, -0.5384693101056831, 0.9061798459386640,
                                 -0.9061798459386640};
    static const double gw[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                 0.2369268850561891, 0.2369268850561891};
    std::vector<double> qpts;
    qpts.reserve(5 * (n - 1));
    for (int k = 0; k + 1 < n; ++k) {
        const double c = 0.5 * (x[k] + x[k + 1]), h = 0.5 * (x[k + 1] - x[k]);
        for (double t : gx) qpts.push_back(c + h * t);
    }
    const auto qframes = frames(qpts);
    y[0] = 0.0;
    for (int k = 0; k + 1 < n; ++k) {
        const double h = 0.5 * (x[k + 1] - x[k]);
        double s = 0.0;
        for (int p = 0; p < 5; ++p) s += gw[p] * std::sqrt(qframes[5 * k + p].g);
        y[k + 1] = y[k] + h * s;
    }
    length_ = y.back();
    G_ = MonotoneSpline(std::move(x), std::move(y), std::move(dy));
}

double KernelContext::coordinate(double theta) const {
    if (mode_ == Mode::limit) {
        if (dict_.family == Family::gaussian_translate)
            return (theta - lo_) / (std::sqrt(2.0) * dict_.scale);
        return 0.5 * std::log(theta / lo_);
    }
    return G_(theta);
}

double KernelContext::from_coordinate(double G) const {
    if (mode_ == Mode::limit) {
        if (dict_.family == Family::gaussian_translate) return lo_ + G * std::sqrt(2.0) * dict_.scale;
        return lo_ * std::exp(2.0 * G);
    }
    return G_.inverse(G);
}

double KernelContext::metric_distance(double theta, double theta2) const {
    if (!in_window(theta) || !in_window(theta2)) throw DomainError("metric_distance: theta outside window");
    if (mode_ == Mode::limit) return std::abs(coordinate(theta) - coordinate(theta2));
    const auto r = adaptive_gauss_legendre([this](double t) { return std::sqrt(frame(t).g); },
                                           std::min(theta, theta2), std::max(theta, theta2), 1e-9);
    return r.value;
}

std::vector<double> KernelContext::uniform_grid(double step) const {
    if (!(step > 0.0)) throw DomainError("grid step must be positive");
    const std::size_t n = static_cast<std::size_t>(std::ceil(length_ / step));
    std::vector<double> out(n + 1);
    for (std::size_t k = 0; k <= n; ++k) out[k] = from_coordinate(length_ * k / static_cast<double>(n));
    out.front() = lo_;
    out.back() = hi_;
    return out;
}

LimitConstants KernelContext::limit_constants() const {
    if (mode_ == Mode::limit && dict_.family == Family::gaussian_translate)
        return LimitConstants::gaussian(dict_.scale);
    // Numeric sups over the window on a d-uniform grid.
    const auto grid = uniform_grid(std::min(0.02, length_ / 200.0));
    const auto fr = frames(grid);
    LimitConstants L;
    L.m_g = fr.front().g;
    for (const auto& f : fr) L.m_g = std::min(L.m_g, f.g);
    for (std::size_t k = 0; k < fr.size(); ++k) {
        for (std::size_t l = 0; l < fr.size(); ++l) {
            const Eigen::Matrix4d K = kernel_block(fr[k], fr[l]);
            L.L00 = std::max(L.L00, std::abs(K(0, 0)));
            L.L10 = std::max(L.L10, std::abs(K(1, 0)));
            L.L11 = std::max(L.L11, std::abs(K(1, 1)));
            L.L20 = std::max(L.L20, std::abs(K(2, 0)));
            L.L21 = std::max(L.L21, std::abs(K(2, 1)));
            L.L22 = std::max(L.L22, std::abs(K(2, 2)));
        }
        L.L3 = std::max(L.L3, kernel_block(fr[k], fr[k])(3, 3));
    }
    return L;
}

double epsilon_gaussian_limit(double r) { return 1.0 - std::exp(-0.5 * r * r); }

double nu_gaussian_limit(double r) {
    const double d = std::min(r, std::sqrt(3.0));
    return (1.0 - d * d) * std::exp(-0.5 * d * d);
}

namespace {

constexpr int sup_grid_factor = 50;

// Local refinement around (G1, G2) in the coordinate plane on a finer grid.
template <class Value, class Admissible>
void refine_pair(const KernelContext& ctx, double h, double& G1, double& G2, double& best, Value value,
                 Admissible admissible) {
    const double L = ctx.riemannian_length();
    const double c1 = G1, c2 = G2;
    for (int a = -10; a <= 10; ++a) {
        for (int b = -10; b <= 10; ++b) {
            const double u = std::clamp(c1 + a * h / 10.0, 0.0, L);
            const double v = std::clamp(c2 + b * h / 10.0, 0.0, L);
            if (!admissible(std::abs(u - v))) continue;
            const double val = value(ctx.from_coordinate(u), ctx.from_coordinate(v));
            if (val > best) {
                best = val;
                G1 = u;
                G2 = v;
            }
        }
    }
}

}  // namespace

SupSearch epsilon_search(const KernelContext& ctx, double r) {
    if (!(r > 0.0)) throw DomainError("epsilon: r must be positive");
    SupSearch out;
    const double L = ctx.riemannian_length();
    out.step = r / sup_grid_factor;
    if (L < r) {
        out.value = std::numeric_limits<double>::infinity();
        return out;
    }
    const std::size_t n = static_cast<std::size_t>(std::floor(L / out.step)) + 1;
    std::vector<double> thetas(n);
    for (std::size_t k = 0; k < n; ++k) thetas[k] = ctx.from_coordinate(k * out.step);
    out.grid_points = n;
    const auto fr = ctx.frames(thetas);
    const Eigen::MatrixXd K = ctx.kernel_table(fr, fr, 0, 0);
    double best = -1.0;
    std::size_t bk = 0, bl = 0;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = k + sup_grid_factor; l < n; ++l)
            if (std::abs(K(k, l)) > best) {
                best = std::abs(K(k, l));
                bk = k;
                bl = l;
            }
    double G1 = bk * out.step, G2 = bl * out.step;
    refine_pair(
        ctx, out.step, G1, G2, best,
        [&](double a, double b) { return std::abs(ctx.kernel_deriv(a, b, 0, 0)); },
        [&](double d) { return d >= r; });
    out.theta = ctx.from_coordinate(G1);
    out.theta2 = ctx.from_coordinate(G2);
    out.value = 1.0 - best;
    return out;
}

SupSearch nu_search(const KernelContext& ctx, double r) {
    if (!(r > 0.0)) throw DomainError("nu: r must be positive");
    SupSearch out;
    const double L = ctx.riemannian_length();
    out.step = std::min(r, L) / sup_grid_factor;
    const std::size_t n = static_cast<std::size_t>(std::floor(L / out.step)) + 1;
    std::vector<double> thetas(n);
    for (std::size_t k = 0; k < n; ++k) thetas[k] = ctx.from_coordinate(std::min(L, k * out.step));
    out.grid_points = n;
    const auto fr = ctx.frames(thetas);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bk = 0, bl = 0;
    // Only the band d <= r is needed.
    const std::size_t band = static_cast<std::size_t>(std::floor(r / out.step + 1e-9));
    if (ctx.mode() == KernelContext::Mode::discrete) {
        const RowMatrix M0 = ctx.covariant_matrix(fr, 0);
        RowMatrix M2 = ctx.covariant_matrix(fr, 2);
        const Eigen::Map<const Eigen::VectorXd> w(ctx.measure()->weights().data(), ctx.measure()->size());
        M2 = M2 * w.asDiagonal();
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t l0 = k >= band ? k - band : 0;
            const std::size_t l1 = std::min(n - 1, k + band);
            for (std::size_t l = l0; l <= l1; ++l) {
                const double v = M0.row(k).dot(M2.row(l));
                if (v > best) { best = v; bk = k; bl = l; }
            }
        }
    } else {
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t l0 = k >= band ? k - band : 0;
            const std::size_t l1 = std::min(n - 1, k + band);
            for (std::size_t l = l0; l <= l1; ++l) {
                const double v = ctx.kernel_block(fr[k], fr[l])(0, 2);
                if (v > best) { best = v; bk = k; bl = l; }
            }
        }
    }
    double G1 = bk * out.step, G2 = bl * out.step;
    refine_pair(
        ctx, out.step, G1, G2, best, [&](double a, double b) { return ctx.kernel_deriv(a, b, 0, 2); },
        [&](double d) { return d <= r; });
    out.theta = ctx.from_coordinate(G1);
    out.theta2 = ctx.from_coordinate(G2);
    out.value = -best;
    return out;
}

double epsilon(const KernelContext& ctx, double r) {
    if (ctx.is_limit() && ctx.dict().family == Family::gaussian_translate) {
        if (!(r > 0.0)) throw DomainError("epsilon: r must be positive");
        if (ctx.riemannian_length() < r) return std::numeric_limits<double>::infinity();
        return epsilon_gaussian_limit(r);
    }
    return epsilon_search(ctx, r).value;
}

double nu(const KernelContext& ctx, double r) {
    if (ctx.is_limit() && ctx.dict().family == Family::gaussian_translate) {
        if (!(r > 0.0)) throw DomainError("nu: r must be positive");
        return nu_gaussian_limit(std::min(r, ctx.riemannian_length()));
    }
    return nu_search(ctx, r).value;
}

LimitComparison limit_compare(const KernelContext& ctx_T, const KernelContext& ctx_inf,
                              const std::vector<double>& probe_grid) {
    if (ctx_T.dict().family != ctx_inf.dict().family)
        throw DomainError("limit_compare: contexts use different dictionary families");
    LimitComparison out;
    out.probes = probe_grid.size();
    const auto fa = ctx_T.frames(probe_grid);
    const auto fb = ctx_inf.frames(probe_grid);
    for (int i = 0; i <= 2; ++i) {
        for (int j = i; j <= 2; ++j) {
            const Eigen::MatrixXd d = ctx_T.kernel_table(fa, fa, i, j) - ctx_inf.kernel_table(fb, fb, i, j);
            out.sup_kernel_diff = std::max(out.sup_kernel_diff, d.cwiseAbs().maxCoeff());
        }
    }
    double rho = 1.0;
    for (std::size_t k = 0; k < probe_grid.size(); ++k) {
        const double hT = ctx_T.kernel_block(fa[k], fa[k])(3, 3);
        const double hI = ctx_inf.kernel_block(fb[k], fb[k])(3, 3);
        out.sup_h_diff = std::max(out.sup_h_diff, std::abs(hT - hI));
        const double ratio = std::sqrt(fa[k].g / fb[k].g);
        rho = std::max({rho, ratio, 1.0 / ratio});
    }
    out.V_T = std::max(out.sup_kernel_diff, out.sup_h_diff);
    out.rho_T = rho;
    return out;
}

TaylorReport taylor_check_feature(const KernelContext& ctx, double theta0, double theta, int scan_points) {
    TaylorReport rep;
    const Frame f0 = ctx.frame(theta0);
    const Frame f1 = ctx.frame(theta);
    rep.distance = ctx.metric_distance(theta0, theta);
    const double c = (theta >= theta0 ? 1.0 : -1.0) * rep.distance;
    // |phi(theta) - phi(theta0) - c phi^{[1]}(theta0)|^2 expanded through the kernel.
    const Eigen::Matrix4d K10 = ctx.kernel_block(f1, f0);
    const Eigen::Matrix4d K00 = ctx.kernel_block(f0, f0);
    const double sq = 1.0 + 1.0 + c * c * K00(1, 1) - 2.0 * K10(0, 0) - 2.0 * c * K10(0, 1) +
                      2.0 * c * K00(0, 1);
    rep.residual = std::sqrt(std::max(0.0, sq));
    if (theta == theta0) rep.residual = 0.0;
    for (int k = 0; k < scan_points; ++k) {
        const double t = theta0 + (theta - theta0) * k / static_cast<double>(std::max(1, scan_points - 1));
        const Frame f = ctx.frame(t);
        rep.sup_second = std::max(rep.sup_second, std::sqrt(std::max(0.0, ctx.kernel_block(f, f)(2, 2))));
    }
    rep.bound = 0.5 * rep.distance * rep.distance * rep.sup_second;
    rep.pass = rep.residual <= 1.05 * rep.bound + 1e-14;
    return rep;
}

void export_kernel_csv(const KernelContext& ctx, const std::vector<double>& thetas, int max_order,
                       std::ostream& os) {
    const auto fr = ctx.frames(thetas);
    os << "theta,theta2,i,j,value\n";
    os.precision(17);
    for (const auto& a : fr)
        for (const auto& b : fr) {
            const Eigen::Matrix4d K = ctx.kernel_block(a, b);
            for (int i = 0; i <= max_order; ++i)
                for (int j = 0; j <= max_order; ++j)
                    os << a.theta << ',' << b.theta << ',' << i << ',' << j << ',' << K(i, j) << '\n';
        }
}

}  // namespace offgrid
