#include "offgrid/measure.hpp"

#include "offgrid/errors.hpp"
#include "offgrid/parallel_kernels.hpp"

#include <atomic>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace offgrid {

namespace {
std::uint64_t next_measure_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
}
}  // namespace

GridMeasure::GridMeasure(std::vector<double> points, std::vector<double> weights, std::string label)
    : points_(std::move(points)), weights_(std::move(weights)), label_(std::move(label)) {
    if (points_.size() != weights_.size())
        throw AlignmentError("GridMeasure: points and weights differ in length");
    if (points_.empty()) throw DomainError("GridMeasure: empty measure");
    CompensatedSum mass;
    uniform_ = true;
    for (std::size_t j = 0; j < points_.size(); ++j) {
        if (!std::isfinite(points_[j]) || !std::isfinite(weights_[j]))
            throw DomainError("GridMeasure: non-finite point or weight");
        if (weights_[j] <= 0.0) throw DomainError("GridMeasure: weights must be positive");
        if (j > 0 && !(points_[j] > points_[j - 1]))
            throw DomainError("GridMeasure: points must be strictly increasing");
        if (weights_[j] != weights_[0]) uniform_ = false;
        max_weight_ = std::max(max_weight_, weights_[j]);
        mass.add(weights_[j]);
    }
    total_mass_ = mass.value();
    id_ = next_measure_id();
}

std::shared_ptr<const GridMeasure> GridMeasure::regular(double a, double b, std::size_t T,
                                                        std::string label) {
    if (T == 0 || !(b > a)) throw DomainError("GridMeasure::regular: need T >= 1 and b > a");
    const double delta = (b - a) / static_cast<double>(T);
    std::vector<double> pts(T), w(T, delta);
    for (std::size_t j = 0; j < T; ++j) pts[j] = a + static_cast<double>(j + 1) * delta;
    return std::make_shared<const GridMeasure>(std::move(pts), std::move(w), std::move(label));
}

std::shared_ptr<const GridMeasure> GridMeasure::probability(std::vector<double> points,
                                                            std::string label) {
    std::vector<double> w(points.size(), points.empty() ? 0.0 : 1.0 / static_cast<double>(points.size()));
    return std::make_shared<const GridMeasure>(std::move(points), std::move(w), std::move(label));
}

void GridMeasure::write_table(std::ostream& os) const {
    os << "# point weight";
    if (!label_.empty()) os << "  (" << label_ << ")";
    os << '\n' << std::setprecision(17);
    for (std::size_t j = 0; j < points_.size(); ++j) os << points_[j] << ' ' << weights_[j] << '\n';
}

std::shared_ptr<const GridMeasure> GridMeasure::read_table(std::istream& is, std::string label) {
    std::vector<double> pts, w;
    std::string line;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double p, q;
        if (!(ls >> p)) continue;
        if (!(ls >> q)) throw DomainError("GridMeasure::read_table: expected two columns");
        pts.push_back(p);
        w.push_back(q);
    }
    return std::make_shared<const GridMeasure>(std::move(pts), std::move(w), std::move(label));
}

HilbertVector::HilbertVector(const GridMeasure& m, std::vector<double> values)
    : values_(std::move(values)), measure_id_(m.id()) {
    if (values_.size() != m.size()) throw AlignmentError("HilbertVector: length differs from measure");
    for (double v : values_)
        if (!std::isfinite(v)) throw DomainError("HilbertVector: non-finite value");
}

HilbertVector::HilbertVector(const GridMeasure& m) : values_(m.size(), 0.0), measure_id_(m.id()) {}

namespace {
void check_same(const HilbertVector& a, const HilbertVector& b) {
    if (a.measure_id() != b.measure_id() || a.size() != b.size())
        throw AlignmentError("HilbertVector: operands live on different measures");
}
}  // namespace

HilbertVector& HilbertVector::operator+=(const HilbertVector& o) { return axpy(1.0, o); }
HilbertVector& HilbertVector::operator-=(const HilbertVector& o) { return axpy(-1.0, o); }

HilbertVector& HilbertVector::operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
}

HilbertVector& HilbertVector::axpy(double a, const HilbertVector& o) {
    check_same(*this, o);
    for (std::size_t j = 0; j < values_.size(); ++j) values_[j] += a * o.values_[j];
    return *this;
}

HilbertVector operator+(HilbertVector a, const HilbertVector& b) { return a += b; }
HilbertVector operator-(HilbertVector a, const HilbertVector& b) { return a -= b; }
HilbertVector operator*(double a, HilbertVector v) { return v *= a; }

double inner(const HilbertVector& f, const HilbertVector& g, const GridMeasure& m) {
    if (f.measure_id() != m.id() || g.measure_id() != m.id() || f.size() != m.size() ||
        g.size() != m.size())
        throw AlignmentError("inner: vectors not aligned with the measure");
    return kernels::weighted_dot(m.weights().data(), f.values().data(), g.values().data(), m.size());
}

double norm(const HilbertVector& f, const GridMeasure& m) {
    return std::sqrt(std::max(0.0, inner(f, f, m)));
}

}  // namespace offgrid
