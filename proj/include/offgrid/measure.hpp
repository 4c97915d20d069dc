#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace offgrid {

/// Atomic measure lambda_T = sum_j w_j delta_{t_j}. Immutable once built.
class GridMeasure {
public:
    GridMeasure(std::vector<double> points, std::vector<double> weights, std::string label = {});

    /// Regular grid t_j = a + j*(b-a)/T, j = 1..T, every weight equal to (b-a)/T.
    static std::shared_ptr<const GridMeasure> regular(double a, double b, std::size_t T,
                                                      std::string label = {});
    /// Arbitrary points with weight 1/T each.
    static std::shared_ptr<const GridMeasure> probability(std::vector<double> points,
                                                          std::string label = {});

    const std::vector<double>& points() const { return points_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::string& label() const { return label_; }
    std::size_t size() const { return points_.size(); }
    double total_mass() const { return total_mass_; }
    double max_weight() const { return max_weight_; }
    /// True when all weights coincide (Delta_T is then that common weight).
    bool uniform_weights() const { return uniform_; }
    std::uint64_t id() const { return id_; }

    /// Two-column text table: "point weight" per line, '#' starts a comment.
    void write_table(std::ostream& os) const;
    static std::shared_ptr<const GridMeasure> read_table(std::istream& is, std::string label = {});

private:
    std::vector<double> points_;
    std::vector<double> weights_;
    std::string label_;
    double total_mass_ = 0.0;
    double max_weight_ = 0.0;
    bool uniform_ = false;
    std::uint64_t id_ = 0;
};

using MeasurePtr = std::shared_ptr<const GridMeasure>;

/// Grid function tagged with the id of the measure it lives on.
class HilbertVector {
public:
    HilbertVector() = default;
    HilbertVector(const GridMeasure& m, std::vector<double> values);
    /// Zero vector on m.
    explicit HilbertVector(const GridMeasure& m);

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& mutable_values() { return values_; }
    std::size_t size() const { return values_.size(); }
    std::uint64_t measure_id() const { return measure_id_; }
    double operator[](std::size_t j) const { return values_[j]; }

    HilbertVector& operator+=(const HilbertVector& o);
    HilbertVector& operator-=(const HilbertVector& o);
    HilbertVector& operator*=(double a);
    /// this += a * o
    HilbertVector& axpy(double a, const HilbertVector& o);

private:
    std::vector<double> values_;
    std::uint64_t measure_id_ = 0;
};

HilbertVector operator+(HilbertVector a, const HilbertVector& b);
HilbertVector operator-(HilbertVector a, const HilbertVector& b);
HilbertVector operator*(double a, HilbertVector v);

/// <f,g>_T = sum_j w_j f(t_j) g(t_j), compensated summation.
double inner(const HilbertVector& f, const HilbertVector& g, const GridMeasure& m);
double norm(const HilbertVector& f, const GridMeasure& m);

/// Neumaier-compensated accumulator.
struct CompensatedSum {
    double sum = 0.0;
    double c = 0.0;
    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            c += (sum - t) + x;
        else
            c += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + c; }
};

}  // namespace offgrid
