#include "offgrid/estimator.hpp"

#include "offgrid/errors.hpp"
#include "offgrid/parallel_kernels.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace offgrid {

void Observation::validate() const {
    if (!measure) throw AlignmentError("observation has no measure");
    if (y.size() != measure->size() || y.measure_id() != measure->id())
        throw AlignmentError("observation vector does not live on the observation measure");
    if (truth) {
        if (truth->beta.size() != truth->theta.size())
            throw AlignmentError("truth amplitudes and parameters differ in length");
        for (double b : truth->beta)
            if (b == 0.0) throw DomainError("truth amplitudes must be nonzero");
    }
    if (sigma < 0.0 || delta < 0.0) throw DomainError("noise metadata must be nonnegative");
}

void SolverConfig::validate() const {
    if (!(kappa >= 0.0)) throw DomainError("kappa must be >= 0");
    if (max_atoms < 1) throw DomainError("atom cap must be >= 1");
    if (!(coarse_step > 0.0 && gradient_tol > 0.0 && prune_threshold > 0.0 && stop_slack > 0.0 &&
          merge_distance > 0.0 && kkt_tol > 0.0))
        throw DomainError("solver tolerances must be positive");
    if (max_newton < 1 || max_outer < 1 || max_sweeps < 1 || max_refine < 0)
        throw DomainError("solver iteration budgets must be positive");
}

std::size_t SolverConfig::default_cap(const Observation& obs) {
    return obs.truth ? std::max<std::size_t>(1, 4 * obs.truth->beta.size()) : 32;
}

double tuning_kappa(double sigma, double delta, double tau, double C1) {
    if (!(tau > 1.0)) throw DomainError("tuning_kappa needs tau > 1");
    if (sigma < 0.0 || delta < 0.0 || C1 < 0.0) throw DomainError("tuning_kappa needs nonnegative inputs");
    return C1 * sigma * std::sqrt(delta * std::log(tau));
}

namespace {

double soft(double z, double k) { return z > k ? z - k : (z < -k ? z + k : 0.0); }

struct LassoState {
    LassoResult res;
    bool converged = false;
};

LassoState lasso_cd(const Eigen::MatrixXd& K, const Eigen::VectorXd& c, double yy, double kappa, double tol,
                    int max_sweeps, const std::vector<double>& warm) {
    const Eigen::Index n = c.size();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    if (static_cast<Eigen::Index>(warm.size()) == n)
        for (Eigen::Index k = 0; k < n; ++k) b(k) = warm[k];
    LassoState st;
    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    auto kkt = [&](const Eigen::VectorXd& beta) {
        const Eigen::VectorXd g = c - K * beta;
        double worst = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            const double v = beta(k) != 0.0 ? std::abs(g(k) - kappa * (beta(k) > 0 ? 1.0 : -1.0))
                                             : std::max(0.0, std::abs(g(k)) - kappa);
            worst = std::max(worst, v);
        }
        return worst;
    };
    int sweep = 0;
    double resid = kkt(b);
    while (resid > tol * scale && sweep < max_sweeps) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const double z = c(k) - K.row(k).dot(b) + K(k, k) * b(k);
            b(k) = soft(z, kappa) / K(k, k);
        }
        ++sweep;
        resid = kkt(b);
    }
    st.converged = resid <= tol * scale;
    st.res.beta.assign(b.data(), b.data() + n);
    st.res.sweeps = sweep;
    st.res.kkt_residual = resid;
    // Duality gap from Gram quantities; the dual point is the rescaled residual.
    const double bc = b.dot(c), bKb = b.dot(K * b);
    const double primal = 0.5 * yy - bc + 0.5 * bKb + kappa * b.lpNorm<1>();
    const double rr = std::max(0.0, yy - 2.0 * bc + bKb);
    const double corr_max = n ? (c - K * b).cwiseAbs().maxCoeff() : 0.0;
    const double s = corr_max > kappa ? kappa / corr_max : 1.0;
    const double dual = s * (yy - bc) - 0.5 * s * s * rr;
    st.res.duality_gap = std::max(0.0, primal - dual);
    return st;
}

}  // namespace

LassoResult lasso_amplitudes(const Eigen::MatrixXd& gram, const Eigen::VectorXd& corr, double y_norm2,
                             double kappa, double tol, int max_sweeps, const std::vector<double>& warm) {
    if (gram.rows() != gram.cols() || gram.rows() != corr.size())
        throw AlignmentError("lasso: Gram and correlation sizes differ");
    if (!(kappa >= 0.0)) throw DomainError("lasso: kappa must be >= 0");
    for (Eigen::Index k = 0; k < gram.rows(); ++k)
        if (!(gram(k, k) > 0.0)) throw DegeneracyError("lasso: Gram diagonal must be positive");
    auto st = lasso_cd(gram, corr, y_norm2, kappa, tol, max_sweeps, warm);
    if (!st.converged)
        throw IterationError("lasso did not converge after " + std::to_string(st.res.sweeps) +
                             " sweeps, duality gap " + std::to_string(st.res.duality_gap));
    return st.res;
}

LassoResult lasso_amplitudes(const KernelContext& ctx, const std::vector<double>& theta,
                             const HilbertVector& y, double kappa) {
    const GridMeasure& m = *ctx.measure();
    for (std::size_t k = 0; k < theta.size(); ++k)
        for (std::size_t l = 0; l < k; ++l)
            if (theta[k] == theta[l]) throw DomainError("lasso: atoms must be distinct");
    const auto fr = ctx.frames(theta);
    const std::size_t n = theta.size();
    std::vector<std::vector<double>> phi(n);
    for (std::size_t k = 0; k < n; ++k) phi[k] = ctx.covariant_values(fr[k], 0);
    Eigen::MatrixXd K(n, n);
    Eigen::VectorXd c(n);
    for (std::size_t k = 0; k < n; ++k) {
        c(k) = kernels::weighted_dot(m.weights().data(), phi[k].data(), y.values().data(), m.size());
        for (std::size_t l = 0; l <= k; ++l)
            K(k, l) = K(l, k) =
                kernels::weighted_dot(m.weights().data(), phi[k].data(), phi[l].data(), m.size());
    }
    return lasso_amplitudes(K, c, inner(y, y, m), kappa);
}

namespace {

// Working state of one fit: atoms with their grid features.
struct Atom {
    double theta = 0.0;
    double beta = 0.0;
    Frame frame;
    std::vector<double> phi0, phi1;
};

class Workspace {
public:
    Workspace(const KernelContext& ctx, const HilbertVector& y, double kappa)
        : ctx_(ctx), m_(*ctx.measure()), y_(y.values()), kappa_(kappa) {
        yy_ = dot(y_, y_);
    }

    Atom make(double theta, double beta) const {
        Atom a;
        a.theta = theta;
        a.beta = beta;
        a.frame = ctx_.frame(theta);
        a.phi0 = ctx_.covariant_values(a.frame, 0);
        a.phi1 = ctx_.covariant_values(a.frame, 1);
        return a;
    }

    double dot(const std::vector<double>& a, const std::vector<double>& b) const {
        return kernels::weighted_dot(m_.weights().data(), a.data(), b.data(), m_.size());
    }

    std::vector<double> residual(const std::vector<Atom>& atoms) const {
        std::vector<double> r = y_;
        for (const auto& a : atoms)
            for (std::size_t j = 0; j < r.size(); ++j) r[j] -= a.beta * a.phi0[j];
        return r;
    }

    double objective(const std::vector<Atom>& atoms) const {
        const auto r = residual(atoms);
        double l1 = 0.0;
        for (const auto& a : atoms) l1 += std::abs(a.beta);
        return 0.5 * dot(r, r) + kappa_ * l1;
    }

    /// Re-solve amplitudes at fixed parameters; false when coordinate descent stalls.
    bool lasso(std::vector<Atom>& atoms, const SolverConfig& cfg) const {
        const std::size_t n = atoms.size();
        if (n == 0) return true;
        Eigen::MatrixXd K(n, n);
        Eigen::VectorXd c(n);
        std::vector<double> warm(n);
        for (std::size_t k = 0; k < n; ++k) {
            c(k) = dot(atoms[k].phi0, y_);
            warm[k] = atoms[k].beta;
            for (std::size_t l = 0; l <= k; ++l) K(k, l) = K(l, k) = dot(atoms[k].phi0, atoms[l].phi0);
        }
        const auto st = lasso_cd(K, c, yy_, kappa_, cfg.kkt_tol, cfg.max_sweeps, warm);
        for (std::size_t k = 0; k < n; ++k) atoms[k].beta = st.res.beta[k];
        return st.converged;
    }

    /// Local maximum of |<phi_T(theta), r>| near theta0 by safeguarded Newton in the G-coordinate.
    std::pair<double, double> refine_insert(double theta0, const std::vector<double>& r,
                                            const SolverConfig& cfg) const {
        auto eval = [&](double th, double& h, double& h1, double& h2, double sgn) {
            const Frame f = ctx_.frame(th);
            h = sgn * dot(ctx_.covariant_values(f, 0), r);
            h1 = sgn * dot(ctx_.covariant_values(f, 1), r);
            h2 = sgn * dot(ctx_.covariant_values(f, 2), r);
            return f.g;
        };
        double h, h1, h2;
        double g = eval(theta0, h, h1, h2, 1.0);
        const double sgn = h >= 0.0 ? 1.0 : -1.0;
        h *= sgn, h1 *= sgn, h2 *= sgn;
        double th = theta0;
        for (int it = 0; it < cfg.max_newton && std::abs(h1) > cfg.gradient_tol; ++it) {
            double dG = h2 < 0.0 ? -h1 / h2 : (h1 > 0.0 ? 1.0 : -1.0) * cfg.coarse_step;
            dG = std::clamp(dG, -cfg.coarse_step, cfg.coarse_step);
            bool moved = false;
            for (int half = 0; half < 30; ++half, dG *= 0.5) {
                const double cand = std::clamp(th + dG / std::sqrt(g), ctx_.lo(), ctx_.hi());
                if (cand == th) break;
                double ch, ch1, ch2;
                const double cg = eval(cand, ch, ch1, ch2, sgn);
                if (ch >= h) {
                    th = cand, h = ch, h1 = ch1, h2 = ch2, g = cg;
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
        }
        return {th, h};
    }

    /// Block step on the parameters (preconditioned by 1/beta^2) then an exact amplitude solve.
    void refine_joint(std::vector<Atom>& atoms, const SolverConfig& cfg) const {
        for (int it = 0; it < cfg.max_refine && !atoms.empty(); ++it) {
            const auto r = residual(atoms);
            const std::size_t n = atoms.size();
            std::vector<double> grad(n), dir(n);
            double worst = 0.0, slope = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double c1 = dot(atoms[k].phi1, r);
                grad[k] = -atoms[k].beta * c1;  // dF/dG_k
                dir[k] = atoms[k].beta != 0.0 ? c1 / atoms[k].beta : 0.0;
                // Projected gradient: ignore atoms pinned at the window edge.
                const bool pinned = (atoms[k].theta <= ctx_.lo() && dir[k] < 0.0) ||
                                    (atoms[k].theta >= ctx_.hi() && dir[k] > 0.0);
                if (pinned) dir[k] = 0.0;
                else worst = std::max(worst, std::abs(grad[k]));
                slope += grad[k] * dir[k];
            }
            if (worst <= cfg.gradient_tol || slope >= 0.0) return;
            const double F0 = 0.5 * dot(r, r) + kappa_ * l1(atoms);
            double t = 1.0;
            bool accepted = false;
            std::vector<Atom> trial;
            for (int half = 0; half < 40; ++half, t *= 0.5) {
                trial.clear();
                for (std::size_t k = 0; k < n; ++k) {
                    const double th = std::clamp(
                        atoms[k].theta + t * dir[k] / std::sqrt(atoms[k].frame.g), ctx_.lo(), ctx_.hi());
                    trial.push_back(th == atoms[k].theta ? atoms[k] : make(th, atoms[k].beta));
                }
                if (objective(trial) <= F0 + 1e-4 * t * slope) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) return;
            atoms = std::move(trial);
            lasso(atoms, cfg);
        }
    }

    static double l1(const std::vector<Atom>& atoms) {
        double s = 0.0;
        for (const auto& a : atoms) s += std::abs(a.beta);
        return s;
    }

    double y_norm2() const { return yy_; }

private:
    const KernelContext& ctx_;
    const GridMeasure& m_;
    const std::vector<double>& y_;
    double kappa_;
    double yy_ = 0.0;
};

}  // namespace

Solver::Solver(const KernelContext& ctx, double coarse_step) : ctx_(ctx), step_(coarse_step) {
    if (ctx.is_limit()) throw DomainError("the solver needs a discrete context");
    grid_ = ctx.uniform_grid(coarse_step);
    table_ = ctx.covariant_matrix(ctx.frames(grid_), 0);
}

Estimate Solver::fit(const Observation& obs, const SolverConfig& cfg) const {
    obs.validate();
    cfg.validate();
    if (obs.measure->id() != ctx_.measure()->id())
        throw AlignmentError("observation and kernel context use different measures");
    const GridMeasure& m = *obs.measure;
    const std::size_t T = m.size();
    const Workspace ws(ctx_, obs.y, cfg.kappa);
    // Absolute floor keeps kappa = 0 fits from chasing rounding noise.
    const double thr = cfg.kappa * (1.0 + cfg.stop_slack) + 1e-12 * std::max(1.0, std::sqrt(ws.y_norm2()));

    Estimate est;
    est.kappa = cfg.kappa;
    std::vector<Atom> atoms;
    std::vector<double> wr(T), c(grid_.size());
    int it = 0;
    for (;; ++it) {
        const auto r = ws.residual(atoms);
        for (std::size_t j = 0; j < T; ++j) wr[j] = m.weights()[j] * r[j];
        kernels::row_dots(table_.data(), grid_.size(), T, wr.data(), c.data());
        // Refine the three largest local maxima of the coarse correlation.
        std::vector<std::size_t> peaks;
        for (std::size_t k = 0; k < c.size(); ++k) {
            const double a = std::abs(c[k]);
            if ((k == 0 || a >= std::abs(c[k - 1])) && (k + 1 == c.size() || a > std::abs(c[k + 1])))
                peaks.push_back(k);
        }
        std::stable_sort(peaks.begin(), peaks.end(),
                         [&](std::size_t a, std::size_t b) { return std::abs(c[a]) > std::abs(c[b]); });
        if (peaks.size() > 3) peaks.resize(3);
        double best_theta = grid_.empty() ? ctx_.lo() : grid_[0], best = -1.0;
        for (std::size_t p : peaks) {
            const auto [th, h] = ws.refine_insert(grid_[p], r, cfg);
            if (h > best || (h == best && th < best_theta)) best = h, best_theta = th;
        }
        est.max_correlation = std::max(best, 0.0);
        if (est.max_correlation <= thr) {
            est.converged = true;
            break;
        }
        if (it >= cfg.max_outer || atoms.size() >= cfg.max_atoms) break;

        bool merged = false;
        for (const auto& a : atoms)
            merged = merged || ctx_.fast_distance(a.theta, best_theta) < cfg.merge_distance;
        if (!merged) atoms.push_back(ws.make(best_theta, 0.0));
        ws.lasso(atoms, cfg);
        ws.refine_joint(atoms, cfg);

        // Merge coalescing atoms by amplitude addition, then prune.
        for (std::size_t k = 0; k < atoms.size(); ++k) {
            for (std::size_t l = k + 1; l < atoms.size();) {
                if (ctx_.fast_distance(atoms[k].theta, atoms[l].theta) < cfg.merge_distance) {
                    const double b = atoms[k].beta + atoms[l].beta;
                    if (std::abs(atoms[l].beta) > std::abs(atoms[k].beta)) atoms[k] = atoms[l];
                    atoms[k].beta = b;
                    atoms.erase(atoms.begin() + l);
                } else {
                    ++l;
                }
            }
        }
        ws.lasso(atoms, cfg);
        std::erase_if(atoms, [&](const Atom& a) { return std::abs(a.beta) <= cfg.prune_threshold; });
        est.objective_trace.push_back(ws.objective(atoms));
        if (merged && est.objective_trace.size() >= 2 &&
            est.objective_trace.back() >= est.objective_trace[est.objective_trace.size() - 2]) {
            // The insertion point duplicates an atom and nothing moved: stationary but not certified.
            break;
        }
    }
    est.iterations = it;
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.theta < b.theta; });
    for (const auto& a : atoms) {
        est.beta.push_back(a.beta);
        est.theta.push_back(a.theta);
    }
    est.objective = ws.objective(atoms);
    return est;
}

Estimate fit(const KernelContext& ctx, const Observation& obs, const SolverConfig& cfg) {
    return Solver(ctx, cfg.coarse_step).fit(obs, cfg);
}

HilbertVector mixture(const KernelContext& ctx, const std::vector<double>& beta,
                      const std::vector<double>& theta) {
    if (beta.size() != theta.size()) throw AlignmentError("mixture: amplitude and parameter counts differ");
    const GridMeasure& m = *ctx.measure();
    std::vector<double> v(m.size(), 0.0);
    for (std::size_t k = 0; k < beta.size(); ++k) {
        const auto phi = ctx.covariant_values(ctx.frame(theta[k]), 0);
        for (std::size_t j = 0; j < v.size(); ++j) v[j] += beta[k] * phi[j];
    }
    return HilbertVector(m, std::move(v));
}

double objective(const KernelContext& ctx, const Estimate& est, const HilbertVector& y, double kappa) {
    const HilbertVector r = y - mixture(ctx, est.beta, est.theta);
    double l1 = 0.0;
    for (double b : est.beta) l1 += std::abs(b);
    return 0.5 * inner(r, r, *ctx.measure()) + kappa * l1;
}

double prediction_error(const KernelContext& ctx, const Estimate& est, const Observation& obs) {
    if (!obs.truth) throw ModelError("prediction error needs the ground truth");
    const HilbertVector d =
        mixture(ctx, est.beta, est.theta) - mixture(ctx, obs.truth->beta, obs.truth->theta);
    return norm(d, *ctx.measure());
}

ErrorDecomposition error_decomposition(const KernelContext& ctx, const Estimate& est,
                                       const Observation& obs, double r) {
    if (!obs.truth) throw ModelError("error decomposition needs the ground truth");
    if (!(r > 0.0)) throw DomainError("near-region radius must be positive");
    const auto& ts = obs.truth->theta;
    const auto& bs = obs.truth->beta;
    for (std::size_t k = 0; k < ts.size(); ++k)
        for (std::size_t l = 0; l < k; ++l)
            if (ctx.metric_distance(ts[k], ts[l]) <= 2.0 * r)
                throw DomainError("near-region balls overlap: truth gap must exceed 2 r");
    ErrorDecomposition e;
    e.r = r;
    e.prediction_error = prediction_error(ctx, est, obs);
    e.assignment.assign(est.theta.size(), -1);
    std::vector<double> sum_b(ts.size(), 0.0), first(ts.size(), 0.0);
    double l1_hat = 0.0, l1_star = 0.0;
    for (std::size_t l = 0; l < est.theta.size(); ++l) {
        l1_hat += std::abs(est.beta[l]);
        for (std::size_t k = 0; k < ts.size(); ++k) {
            const double d = ctx.metric_distance(est.theta[l], ts[k]);
            if (d <= r) {
                e.assignment[l] = static_cast<int>(k);
                sum_b[k] += est.beta[l];
                const double sg = est.theta[l] > ts[k] ? 1.0 : (est.theta[l] < ts[k] ? -1.0 : 0.0);
                first[k] += est.beta[l] * sg * d;
                e.I2 += std::abs(est.beta[l]) * d * d;
                break;
            }
        }
        if (e.assignment[l] < 0) e.I3 += std::abs(est.beta[l]);
    }
    for (std::size_t k = 0; k < ts.size(); ++k) {
        e.I0 += std::abs(sum_b[k] - bs[k]);
        e.I1 += std::abs(first[k]);
        l1_star += std::abs(bs[k]);
    }
    e.l1_diff = std::abs(l1_hat - l1_star);
    return e;
}

std::string to_json(const Estimate& est, int indent) {
    nlohmann::json j;
    j["beta"] = est.beta;
    j["theta"] = est.theta;
    j["kappa"] = est.kappa;
    j["iterations"] = est.iterations;
    j["max_correlation"] = est.max_correlation;
    j["objective"] = est.objective;
    j["converged"] = est.converged;
    j["objective_trace"] = est.objective_trace;
    return j.dump(indent);
}

std::string to_json(const ErrorDecomposition& e, int indent) {
    nlohmann::json j;
    j["prediction_error"] = e.prediction_error;
    j["I0"] = e.I0;
    j["I1"] = e.I1;
    j["I2"] = e.I2;
    j["I3"] = e.I3;
    j["l1_diff"] = e.l1_diff;
    j["r"] = e.r;
    j["assignment"] = e.assignment;
    return j.dump(indent);
}

}  // namespace offgrid
