#pragma once

#include <cstddef>
#include <vector>

// Hot loops in two flavours: a serial reference and an OpenMP version.
// Tests check that they agree; bench/ compares their speed.
namespace offgrid::kernels {

/// sum_j w_j f_j g_j with compensated accumulation.
double weighted_dot_serial(const double* w, const double* f, const double* g, std::size_t n);
double weighted_dot_omp(const double* w, const double* f, const double* g, std::size_t n);

/// out[k] = sum_j rows[k*n + j] * v[j] for k < m (row-major m x n block).
void row_dots_serial(const double* rows, std::size_t m, std::size_t n, const double* v, double* out);
void row_dots_omp(const double* rows, std::size_t m, std::size_t n, const double* v, double* out);

/// Index of max |x_k|; ties resolve to the smaller index.
std::size_t argmax_abs_serial(const double* x, std::size_t m);
std::size_t argmax_abs_omp(const double* x, std::size_t m);

/// Default dispatch. weighted_dot switches to the blocked sum at n >= 8192 regardless of threads;
/// row_dots uses OpenMP when more than one thread is available (bitwise identical rows).
double weighted_dot(const double* w, const double* f, const double* g, std::size_t n);
void row_dots(const double* rows, std::size_t m, std::size_t n, const double* v, double* out);

/// Thread count used by OpenMP regions (1 when built without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace offgrid::kernels
