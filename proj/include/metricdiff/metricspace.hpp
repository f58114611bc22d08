#pragma once

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "metricdiff/core.hpp"
#include "metricdiff/polyhedral.hpp"

namespace metricdiff {

// ---------------------------------------------------------------------------
// Points

struct Point;

struct IndexPoint {
    std::size_t index = 0;
    friend bool operator==(const IndexPoint&, const IndexPoint&) = default;
};

// (u, v) in R^n x M for the lifted map x -> (x, f(x)).
struct LiftedPoint {
    Vec domain;
    std::shared_ptr<const Point> value;
};

struct Point {
    std::variant<Vec, IndexPoint, LiftedPoint> payload;

    static Point vector(Vec v) { return Point{std::move(v)}; }
    static Point index(std::size_t i) { return Point{IndexPoint{i}}; }
    static Point lifted(Vec domain, Point value) {
        return Point{LiftedPoint{std::move(domain), std::make_shared<const Point>(std::move(value))}};
    }

    const Vec* as_vector() const { return std::get_if<Vec>(&payload); }
};

// ---------------------------------------------------------------------------
// Backends

class DistanceMatrix {
public:
    DistanceMatrix() = default;

    // Validates zero diagonal, symmetry, nonnegativity and every triangle
    // inequality; throws InvalidMetric naming the first violation.
    explicit DistanceMatrix(std::size_t size, std::vector<double> data, double tol = 1e-12)
        : size_(size), data_(std::move(data)) {
        if (data_.size() != size_ * size_) {
            throw Error(ErrorCode::InvalidMetric, "distance matrix has wrong number of entries");
        }
        validate(tol);
    }

    std::size_t size() const { return size_; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * size_ + j]; }

    // First line: size. Then the strict upper triangle, row-major,
    // whitespace-separated.
    static DistanceMatrix parse(std::istream& in) {
        std::size_t n = 0;
        if (!(in >> n) || n == 0) throw Error(ErrorCode::InvalidMetric, "missing or zero matrix size");
        std::vector<double> d(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double v = 0.0;
                if (!(in >> v)) throw Error(ErrorCode::InvalidMetric, "truncated upper triangle");
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        return DistanceMatrix(n, std::move(d));
    }

    static DistanceMatrix load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::Io, "cannot open distance matrix file " + path);
        return parse(in);
    }

    void write(std::ostream& out) const {
        out << size_ << '\n';
        out.precision(17);
        for (std::size_t i = 0; i < size_; ++i) {
            bool first = true;
            for (std::size_t j = i + 1; j < size_; ++j) {
                if (!first) out << ' ';
                out << (*this)(i, j);
                first = false;
            }
            if (i + 1 < size_) out << '\n';
        }
        out << '\n';
    }

private:
    void validate(double tol) const {
        auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidMetric, msg); };
        for (std::size_t i = 0; i < size_; ++i) {
            if ((*this)(i, i) != 0.0) fail("nonzero diagonal at " + std::to_string(i));
            for (std::size_t j = 0; j < size_; ++j) {
                if (!std::isfinite((*this)(i, j)) || (*this)(i, j) < 0.0)
                    fail("negative or non-finite entry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
                if ((*this)(i, j) != (*this)(j, i))
                    fail("asymmetric entry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
        for (std::size_t i = 0; i < size_; ++i)
            for (std::size_t j = 0; j < size_; ++j)
                for (std::size_t k = 0; k < size_; ++k) {
                    const double lhs = (*this)(i, k);
                    const double rhs = (*this)(i, j) + (*this)(j, k);
                    if (lhs > rhs + tol * std::max(1.0, rhs)) {
                        fail("triangle inequality violated on triple (" + std::to_string(i) + "," +
                             std::to_string(j) + "," + std::to_string(k) + ")");
                    }
                }
    }

    std::size_t size_ = 0;
    std::vector<double> data_;
};

class MetricBackend;

struct SupNormVectors {
    std::size_t dim = 1;
};

struct NormedPlane {
    PolyhedralSeminorm gauge;
};

struct LiftedSpace {
    std::shared_ptr<const MetricBackend> inner;
};

/// Distance structure on the target space M.
class MetricBackend {
public:
    using Variant = std::variant<SupNormVectors, DistanceMatrix, NormedPlane, LiftedSpace>;

    MetricBackend() : v_(SupNormVectors{}) {}
    explicit MetricBackend(Variant v) : v_(std::move(v)) {}

    static std::shared_ptr<const MetricBackend> sup_norm(std::size_t m) {
        return std::make_shared<const MetricBackend>(Variant{SupNormVectors{m}});
    }
    static std::shared_ptr<const MetricBackend> matrix(DistanceMatrix d) {
        return std::make_shared<const MetricBackend>(Variant{std::move(d)});
    }
    static std::shared_ptr<const MetricBackend> normed(PolyhedralSeminorm g) {
        return std::make_shared<const MetricBackend>(Variant{NormedPlane{std::move(g)}});
    }
    static std::shared_ptr<const MetricBackend> lifted(std::shared_ptr<const MetricBackend> inner) {
        return std::make_shared<const MetricBackend>(Variant{LiftedSpace{std::move(inner)}});
    }

    const Variant& variant() const { return v_; }
    bool is_lifted() const { return std::holds_alternative<LiftedSpace>(v_); }

    std::string name() const {
        return std::visit(
            [](const auto& b) -> std::string {
                using T = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<T, SupNormVectors>) return "sup_norm";
                else if constexpr (std::is_same_v<T, DistanceMatrix>) return "distance_matrix";
                else if constexpr (std::is_same_v<T, NormedPlane>) return "normed_plane";
                else return "lifted(" + b.inner->name() + ")";
            },
            v_);
    }

    double distance(const Point& p, const Point& q) const {
        return std::visit([&](const auto& b) { return distance_impl(b, p, q); }, v_);
    }

private:
    static const Vec& vec_of(const Point& p, std::size_t dim) {
        const Vec* v = p.as_vector();
        if (!v || v->size() != dim) throw Error(ErrorCode::BackendMismatch, "expected a vector point");
        return *v;
    }

    static double distance_impl(const SupNormVectors& b, const Point& p, const Point& q) {
        const Vec& a = vec_of(p, b.dim);
        const Vec& c = vec_of(q, b.dim);
        double m = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - c[i]));
        return m;
    }

    static double distance_impl(const DistanceMatrix& d, const Point& p, const Point& q) {
        const auto* a = std::get_if<IndexPoint>(&p.payload);
        const auto* c = std::get_if<IndexPoint>(&q.payload);
        if (!a || !c || a->index >= d.size() || c->index >= d.size())
            throw Error(ErrorCode::BackendMismatch, "expected an index into the distance matrix");
        return d(a->index, c->index);
    }

    static double distance_impl(const NormedPlane& b, const Point& p, const Point& q) {
        const Vec& a = vec_of(p, b.gauge.dim());
        const Vec& c = vec_of(q, b.gauge.dim());
        double m = 0.0;
        for (const Vec& f : b.gauge.functionals()) {
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) s += f[i] * (a[i] - c[i]);
            m = std::max(m, std::abs(s));
        }
        return m;
    }

    static double distance_impl(const LiftedSpace& b, const Point& p, const Point& q) {
        const auto* a = std::get_if<LiftedPoint>(&p.payload);
        const auto* c = std::get_if<LiftedPoint>(&q.payload);
        if (!a || !c || a->domain.size() != c->domain.size())
            throw Error(ErrorCode::BackendMismatch, "expected lifted points");
        const double du = dist2(a->domain, c->domain);
        const double dv = b.inner->distance(*a->value, *c->value);
        return std::sqrt(du * du + dv * dv);
    }

    Variant v_;
};

inline double distance(const MetricBackend& backend, const Point& p, const Point& q) {
    return backend.distance(p, q);
}

/// Pairwise distances within a fixed point set. Sup-norm and polyhedral
/// targets (and their lifts) are flattened to coordinates whose max
/// difference is the target distance; other backends fall back to
/// MetricBackend::distance.
class PointBatch {
public:
    PointBatch(const MetricBackend& backend, const std::vector<Point>& points) : backend_(&backend), points_(&points) {
        const MetricBackend* target = &backend;
        if (const auto* l = std::get_if<LiftedSpace>(&backend.variant())) target = l->inner.get();
        if (target != &backend) {
            for (const Point& p : points) {
                const auto* lp = std::get_if<LiftedPoint>(&p.payload);
                if (!lp) throw Error(ErrorCode::BackendMismatch, "expected lifted points");
                if (!flatten_target(*target, *lp->value)) { reset(); return; }
                if (domain_.empty()) du_ = lp->domain.size();
                if (lp->domain.size() != du_) throw Error(ErrorCode::BackendMismatch, "mixed domain dimensions");
                domain_.insert(domain_.end(), lp->domain.begin(), lp->domain.end());
            }
        } else {
            for (const Point& p : points)
                if (!flatten_target(*target, p)) { reset(); return; }
        }
        flat_ = true;
    }

    std::size_t size() const { return points_->size(); }

    double operator()(std::size_t i, std::size_t j) const {
        if (!flat_) return backend_->distance((*points_)[i], (*points_)[j]);
        const double* a = coords_.data() + i * dv_;
        const double* b = coords_.data() + j * dv_;
        double m = 0.0;
        for (std::size_t k = 0; k < dv_; ++k) m = std::max(m, std::abs(a[k] - b[k]));
        if (du_ == 0) return m;
        const double* x = domain_.data() + i * du_;
        const double* y = domain_.data() + j * du_;
        double s = m * m;
        for (std::size_t k = 0; k < du_; ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
        return std::sqrt(s);
    }

private:
    bool flatten_target(const MetricBackend& target, const Point& p) {
        const Vec* v = p.as_vector();
        if (const auto* s = std::get_if<SupNormVectors>(&target.variant())) {
            if (!v || v->size() != s->dim) throw Error(ErrorCode::BackendMismatch, "expected a vector point");
            dv_ = s->dim;
            coords_.insert(coords_.end(), v->begin(), v->end());
            return true;
        }
        if (const auto* g = std::get_if<NormedPlane>(&target.variant())) {
            if (!v || v->size() != g->gauge.dim()) throw Error(ErrorCode::BackendMismatch, "expected a vector point");
            dv_ = g->gauge.size();
            for (const Vec& f : g->gauge.functionals()) coords_.push_back(dot(f, *v));
            return true;
        }
        return false;
    }

    void reset() {
        coords_.clear();
        domain_.clear();
        du_ = dv_ = 0;
        flat_ = false;
    }

    const MetricBackend* backend_;
    const std::vector<Point>* points_;
    bool flat_ = false;
    std::size_t du_ = 0, dv_ = 0;
    std::vector<double> coords_, domain_;
};

struct KuratowskiEmbedding {
    std::shared_ptr<const MetricBackend> backend;
    std::vector<Point> points;
};

// p_i = (D(i,k) - D(0,k))_k; the sup-norm distance of p_i and p_j is D(i,j).
inline KuratowskiEmbedding kuratowski_embed(const DistanceMatrix& d) {
    const std::size_t n = d.size();
    KuratowskiEmbedding out{MetricBackend::sup_norm(n), {}};
    out.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec p(n);
        for (std::size_t k = 0; k < n; ++k) p[k] = d(i, k) - d(0, k);
        out.points.push_back(Point::vector(std::move(p)));
    }
    return out;
}

}  // namespace metricdiff
