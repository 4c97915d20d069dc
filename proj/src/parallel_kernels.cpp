#include "offgrid/parallel_kernels.hpp"

#include "offgrid/measure.hpp"

#include <algorithm>
#include <cmath>
#include <vector>
#ifdef _OPENMP
#include <omp.h>
#endif

namespace offgrid::kernels {

double weighted_dot_serial(const double* w, const double* f, const double* g, std::size_t n) {
    CompensatedSum acc;
    for (std::size_t j = 0; j < n; ++j) acc.add(w[j] * f[j] * g[j]);
    return acc.value();
}

double weighted_dot_omp(const double* w, const double* f, const double* g, std::size_t n) {
    // Fixed block size keeps the result independent of the thread count.
    constexpr std::size_t block = 1024;
    const std::size_t nb = (n + block - 1) / block;
    std::vector<double> partial(nb, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nb); ++b) {
        CompensatedSum acc;
        const std::size_t lo = static_cast<std::size_t>(b) * block;
        const std::size_t hi = std::min(n, lo + block);
        for (std::size_t j = lo; j < hi; ++j) acc.add(w[j] * f[j] * g[j]);
        partial[b] = acc.value();
    }
    CompensatedSum total;
    for (double p : partial) total.add(p);
    return total.value();
}

void row_dots_serial(const double* rows, std::size_t m, std::size_t n, const double* v, double* out) {
    for (std::size_t k = 0; k < m; ++k) {
        const double* r = rows + k * n;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += r[j] * v[j];
        out[k] = s;
    }
}

void row_dots_omp(const double* rows, std::size_t m, std::size_t n, const double* v, double* out) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(m); ++k) {
        const double* r = rows + static_cast<std::size_t>(k) * n;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += r[j] * v[j];
        out[k] = s;
    }
}

std::size_t argmax_abs_serial(const double* x, std::size_t m) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < m; ++k)
        if (std::abs(x[k]) > std::abs(x[best])) best = k;
    return best;
}

std::size_t argmax_abs_omp(const double* x, std::size_t m) {
    if (m == 0) return 0;
    std::size_t best = 0;
    double best_v = std::abs(x[0]);
#pragma omp parallel
    {
        std::size_t lb = 0;
        double lv = -1.0;
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(m); ++k) {
            const double a = std::abs(x[k]);
            if (a > lv) { lv = a; lb = static_cast<std::size_t>(k); }
        }
#pragma omp critical
        {
            if (lv > best_v || (lv == best_v && lb < best)) { best_v = lv; best = lb; }
        }
    }
    return best;
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

double weighted_dot(const double* w, const double* f, const double* g, std::size_t n) {
    // The blocked sum is used from this size on whatever the thread count, so results do not
    // depend on --jobs.
    if (n >= 8192) return weighted_dot_omp(w, f, g, n);
    return weighted_dot_serial(w, f, g, n);
}

void row_dots(const double* rows, std::size_t m, std::size_t n, const double* v, double* out) {
    if (max_threads() > 1)
        row_dots_omp(rows, m, n, v, out);
    else
        row_dots_serial(rows, m, n, v, out);
}

}  // namespace offgrid::kernels
