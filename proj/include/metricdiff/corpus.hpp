#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "metricdiff/core.hpp"
#include "metricdiff/dyadic.hpp"
#include "metricdiff/metricspace.hpp"
#include "metricdiff/polyhedral.hpp"

namespace metricdiff {

// ---------------------------------------------------------------------------
// Map families

// f(x) = A x into sup-norm R^m. Rows of A are stored.
struct AffineMap {
    std::vector<Vec> rows;
};

// Identity into (R^n, gauge).
struct NormPullbackMap {
    PolyhedralSeminorm gauge;
};

// f(x) = |x - c|_2 into R.
struct CornerMap {
    Vec c;
};

// f(x) = sum_k a_k s_k tau(x_0 / s_k), tau(u) = dist(u, Z). Tooth k has
// slope +-a_k and period s_k.
struct SawtoothMap {
    std::vector<double> amplitudes;
    std::vector<double> periods;

    // Tooth k (1-based) has period 2^(1-k) and slope 1/K, so L = 1.
    static SawtoothMap standard(int levels) {
        SawtoothMap s;
        for (int k = 1; k <= levels; ++k) {
            s.amplitudes.push_back(1.0 / levels);
            s.periods.push_back(std::ldexp(1.0, 1 - k));
        }
        return s;
    }
};

// f(x) = (|x - p|_2)_{p in P} into sup-norm.
struct DistanceCoordsMap {
    std::vector<Vec> points;
};

// Polygonal curve through the vertices at parameters 0, 1/(V-1), ..., 1;
// constant outside [0, 1]. n = 1, into sup-norm.
struct BrokenCurveMap {
    std::vector<Vec> vertices;
};

class MapSpec {
public:
    using Family = std::variant<AffineMap, NormPullbackMap, CornerMap, SawtoothMap, DistanceCoordsMap, BrokenCurveMap>;

    MapSpec(std::size_t n, Family family) : n_(n), family_(std::move(family)) { validate(); }

    static MapSpec affine(std::vector<Vec> rows) {
        const std::size_t n = rows.empty() ? 0 : rows.front().size();
        return MapSpec(n, AffineMap{std::move(rows)});
    }
    static MapSpec norm_pullback(PolyhedralSeminorm g) {
        const std::size_t n = g.dim();
        return MapSpec(n, NormPullbackMap{std::move(g)});
    }
    static MapSpec corner(Vec c) {
        const std::size_t n = c.size();
        return MapSpec(n, CornerMap{std::move(c)});
    }
    static MapSpec sawtooth(std::size_t n, SawtoothMap s) { return MapSpec(n, std::move(s)); }
    static MapSpec distance_coords(std::vector<Vec> pts) {
        const std::size_t n = pts.empty() ? 0 : pts.front().size();
        return MapSpec(n, DistanceCoordsMap{std::move(pts)});
    }
    static MapSpec broken_curve(std::vector<Vec> vertices) { return MapSpec(1, BrokenCurveMap{std::move(vertices)}); }

    std::size_t dim() const { return n_; }
    const Family& family() const { return family_; }

    std::string name() const {
        static constexpr const char* names[] = {"affine", "norm_pullback", "corner", "sawtooth", "distance_coords", "broken_curve"};
        return names[family_.index()];
    }

    std::shared_ptr<const MetricBackend> backend() const {
        return std::visit(
            [&](const auto& m) -> std::shared_ptr<const MetricBackend> {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, AffineMap>) return MetricBackend::sup_norm(m.rows.size());
                else if constexpr (std::is_same_v<T, NormPullbackMap>) return MetricBackend::normed(m.gauge);
                else if constexpr (std::is_same_v<T, DistanceCoordsMap>) return MetricBackend::sup_norm(m.points.size());
                else if constexpr (std::is_same_v<T, BrokenCurveMap>) return MetricBackend::sup_norm(m.vertices.front().size());
                else return MetricBackend::sup_norm(1);
            },
            family_);
    }

    // Closed-form Lipschitz bound against the Euclidean norm on the domain.
    double lipschitz_bound() const {
        return std::visit(
            [&](const auto& m) -> double {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, AffineMap>) {
                    double l = 0.0;
                    for (const Vec& r : m.rows) l = std::max(l, norm2(r));
                    return l;
                } else if constexpr (std::is_same_v<T, NormPullbackMap>) {
                    return m.gauge.lipschitz_bound();
                } else if constexpr (std::is_same_v<T, CornerMap>) {
                    return 1.0;
                } else if constexpr (std::is_same_v<T, SawtoothMap>) {
                    double l = 0.0;
                    for (double a : m.amplitudes) l += std::abs(a);
                    return l;
                } else if constexpr (std::is_same_v<T, DistanceCoordsMap>) {
                    return 1.0;
                } else {
                    const double steps = static_cast<double>(m.vertices.size() - 1);
                    double l = 0.0;
                    for (std::size_t i = 0; i + 1 < m.vertices.size(); ++i)
                        l = std::max(l, norm_inf(sub(m.vertices[i + 1], m.vertices[i])) * steps);
                    return l;
                }
            },
            family_);
    }

    Point evaluate(std::span<const double> x) const {
        if (x.size() != n_) throw Error(ErrorCode::OutOfDomain, "point dimension does not match the map");
        for (double v : x)
            if (!std::isfinite(v)) throw Error(ErrorCode::OutOfDomain, "non-finite point");
        return std::visit([&](const auto& m) { return eval(m, x); }, family_);
    }

private:
    static Point eval(const AffineMap& m, std::span<const double> x) {
        Vec y(m.rows.size());
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = dot(m.rows[i], x);
        return Point::vector(std::move(y));
    }
    static Point eval(const NormPullbackMap&, std::span<const double> x) { return Point::vector(Vec(x.begin(), x.end())); }
    static Point eval(const CornerMap& m, std::span<const double> x) { return Point::vector(Vec{dist2(x, m.c)}); }
    static Point eval(const SawtoothMap& m, std::span<const double> x) {
        double y = 0.0;
        for (std::size_t k = 0; k < m.amplitudes.size(); ++k) {
            const double u = x[0] / m.periods[k];
            const double tau = std::abs(u - std::round(u));
            y += m.amplitudes[k] * m.periods[k] * tau;
        }
        return Point::vector(Vec{y});
    }
    static Point eval(const DistanceCoordsMap& m, std::span<const double> x) {
        Vec y(m.points.size());
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = dist2(x, m.points[i]);
        return Point::vector(std::move(y));
    }
    static Point eval(const BrokenCurveMap& m, std::span<const double> x) {
        const std::size_t segs = m.vertices.size() - 1;
        const double t = std::clamp(x[0], 0.0, 1.0) * static_cast<double>(segs);
        const std::size_t i = std::min(segs - 1, static_cast<std::size_t>(std::floor(t)));
        const double w = t - static_cast<double>(i);
        Vec y(m.vertices[i].size());
        for (std::size_t d = 0; d < y.size(); ++d) y[d] = (1.0 - w) * m.vertices[i][d] + w * m.vertices[i + 1][d];
        return Point::vector(std::move(y));
    }

    void validate() const {
        auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
        if (n_ == 0) bad("map domain dimension must be positive");
        std::visit(
            [&](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, AffineMap>) {
                    if (m.rows.empty()) bad("affine map needs at least one row");
                    for (const Vec& r : m.rows)
                        if (r.size() != n_) bad("affine row dimension mismatch");
                } else if constexpr (std::is_same_v<T, NormPullbackMap>) {
                    if (m.gauge.dim() != n_) bad("gauge dimension mismatch");
                } else if constexpr (std::is_same_v<T, CornerMap>) {
                    if (m.c.size() != n_) bad("corner location dimension mismatch");
                } else if constexpr (std::is_same_v<T, SawtoothMap>) {
                    if (m.amplitudes.size() != m.periods.size() || m.amplitudes.empty()) bad("sawtooth needs matching amplitudes and periods");
                    for (double s : m.periods)
                        if (!(s > 0.0)) bad("sawtooth periods must be positive");
                } else if constexpr (std::is_same_v<T, DistanceCoordsMap>) {
                    if (m.points.empty()) bad("distance_coords needs a point cloud");
                    for (const Vec& p : m.points)
                        if (p.size() != n_) bad("point cloud dimension mismatch");
                } else {
                    if (n_ != 1) bad("broken_curve is defined for n = 1");
                    if (m.vertices.size() < 2) bad("broken_curve needs at least two vertices");
                    for (const Vec& v : m.vertices)
                        if (v.size() != m.vertices.front().size()) bad("vertex dimension mismatch");
                }
            },
            family_);
    }

    std::size_t n_;
    Family family_;
};

inline Point evaluate_map(const MapSpec& spec, std::span<const double> x) { return spec.evaluate(x); }

struct FamilyInfo {
    std::string name;
    std::string parameters;
};

inline std::vector<FamilyInfo> corpus_families() {
    return {
        {"affine", "--A <m x n row-major, rows separated by ';'> (target: sup-norm R^m)"},
        {"norm_pullback", "--gauge l1|linf|<functionals, ';'-separated> (identity into (R^n, gauge))"},
        {"corner", "--c <corner location, comma-separated or scalar> (f(x)=|x-c| into R)"},
        {"sawtooth", "--K <levels> [--amplitudes a1,..] [--periods s1,..] (1-D teeth on x_0 into R)"},
        {"distance_coords", "--points <p1;p2;...> (f(x)=(|x-p|)_p into sup-norm)"},
        {"broken_curve", "--vertices <v1;v2;...> (n=1 polygonal curve into sup-norm)"},
    };
}

// ---------------------------------------------------------------------------
// Sampled maps

struct GridTable {
    Vec origin;                      // lowest node
    double h = 0.0;                  // step
    std::vector<std::size_t> counts; // nodes per axis
    std::vector<Point> values;       // last axis fastest

    std::size_t dim() const { return origin.size(); }

    std::optional<std::size_t> nearest(std::span<const double> x) const {
        std::size_t idx = 0;
        for (std::size_t i = 0; i < dim(); ++i) {
            const double t = (x[i] - origin[i]) / h;
            const double r = std::round(t);
            if (r < -1e-9 || r > static_cast<double>(counts[i] - 1) + 1e-9) return std::nullopt;
            idx = idx * counts[i] + static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(counts[i] - 1)));
        }
        return idx;
    }
};

class SampledMap;

struct SamplingOptions {
    std::uint64_t seed = 1;
    std::size_t random_pairs = 10000;
    // When set, require at least 8 grid steps per side at this level below the root.
    std::optional<int> analysis_depth;
};

/// A Lipschitz map on the margin-enlarged root cube together with its target
/// metric and estimated Lipschitz constant. Closed-form specs are evaluated
/// exactly; raw tables use the nearest node.
class SampledMap {
public:
    std::size_t dim() const { return root_.dim(); }
    const DyadicCube& root() const { return root_; }
    double margin() const { return margin_; }
    double step() const { return h_; }
    const std::shared_ptr<const MetricBackend>& backend() const { return backend_; }
    double lipschitz() const { return l_hat_; }
    std::optional<double> lipschitz_spec() const { return l_spec_; }
    const std::optional<MapSpec>& spec() const { return spec_; }
    bool is_lifted() const { return static_cast<bool>(inner_); }
    const SampledMap* inner() const { return inner_.get(); }
    std::uint64_t seed() const { return seed_; }

    std::string family() const {
        if (inner_) return "lifted(" + inner_->family() + ")";
        return spec_ ? spec_->name() : std::string("table");
    }

    Box domain() const { return root_.dilate(margin_); }

    bool covers(const Box& b) const { return domain().contains(b, 1e-9 * root_.side()); }

    void require_covers(const Box& b, const char* what) const {
        if (!covers(b)) throw Error(ErrorCode::OutOfDomain, std::string(what) + " leaves the sampled domain");
    }

    Point evaluate(std::span<const double> x) const {
        const double side = root_.side();
        const double half = (0.5 * margin_ + 1e-9) * side;
        if (x.size() != root_.dim()) throw Error(ErrorCode::OutOfDomain, "point dimension mismatch");
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double c = root_.grid().offset(i) + (static_cast<double>(root_.coords()[i]) + 0.5) * side;
            if (!(std::abs(x[i] - c) <= half)) throw Error(ErrorCode::OutOfDomain, "point outside the enlarged root");
        }
        if (inner_) return Point::lifted(Vec(x.begin(), x.end()), inner_->evaluate(x));
        if (spec_) return spec_->evaluate(x);
        const auto idx = table_->nearest(x);
        if (!idx) throw Error(ErrorCode::OutOfDomain, "point outside the sampled table");
        return table_->values[*idx];
    }

    double distance(const Point& p, const Point& q) const { return backend_->distance(p, q); }

    // d(f(x), f(y))
    double distance_at(std::span<const double> x, std::span<const double> y) const {
        return distance(evaluate(x), evaluate(y));
    }

    friend SampledMap sample_map(const MapSpec&, const DyadicCube&, double, double, const SamplingOptions&);
    friend SampledMap lift_map(const SampledMap&);
    friend SampledMap sampled_from_table(GridTable, std::shared_ptr<const MetricBackend>, const DyadicCube&, const SamplingOptions&);
    friend double lipschitz_estimate(const SampledMap&);

private:
    DyadicCube root_;
    double margin_ = 1.0;
    double h_ = 0.0;
    std::shared_ptr<const MetricBackend> backend_;
    std::optional<MapSpec> spec_;
    std::shared_ptr<const GridTable> table_;
    std::shared_ptr<const SampledMap> inner_;
    double l_hat_ = 0.0;
    std::optional<double> l_spec_;
    std::uint64_t seed_ = 1;
    std::size_t random_pairs_ = 10000;
};

inline constexpr std::size_t max_scan_nodes = std::size_t{1} << 20;

// Max of dist / |dx| over axis-adjacent grid nodes of the enlarged root and a
// seeded batch of random pairs.
inline double lipschitz_estimate(const SampledMap& f) {
    const std::size_t n = f.dim();
    const Box dom = f.domain();
    // Table-backed maps (possibly lifted) are scanned on their own nodes.
    const SampledMap* base = &f;
    while (base->inner_) base = base->inner_.get();
    const GridTable* table = base->table_.get();
    double h = f.h_;
    std::vector<std::size_t> counts(n);
    Vec lo(n);
    std::size_t total = 1;
    for (;;) {
        total = 1;
        for (std::size_t i = 0; i < n; ++i) {
            if (table) {
                const double first = std::ceil((dom.lower(i) - table->origin[i]) / h - 1e-9);
                const double last = std::floor((dom.upper(i) - table->origin[i]) / h + 1e-9);
                lo[i] = table->origin[i] + std::max(0.0, first) * h;
                counts[i] = static_cast<std::size_t>(
                                std::min(last, static_cast<double>(table->counts[i] - 1)) - std::max(0.0, first)) + 1;
            } else {
                lo[i] = dom.lower(i);
                counts[i] = static_cast<std::size_t>(std::llround(dom.side() / h)) + 1;
            }
            total *= counts[i];
        }
        // Closed-form maps: coarsen the scan (by doublings, so nodes stay on
        // the grid) until it fits the node budget.
        if (table || total <= max_scan_nodes) break;
        h *= 2.0;
    }
    if (total < 2) throw Error(ErrorCode::ResolutionTooCoarse, "need at least two grid nodes");

    auto node = [&](std::size_t idx) {
        Vec x(n);
        for (std::size_t i = n; i-- > 0;) {
            x[i] = lo[i] + static_cast<double>(idx % counts[i]) * h;
            idx /= counts[i];
        }
        return x;
    };

    double best = 0.0;
    for (std::size_t idx = 0; idx < total; ++idx) {
        const Vec x = node(idx);
        const Point fx = f.evaluate(x);
        std::size_t stride = 1;
        for (std::size_t i = n; i-- > 0;) {
            const std::size_t digit = (idx / stride) % counts[i];
            if (digit + 1 < counts[i]) {
                Vec y = x;
                y[i] += h;
                best = std::max(best, f.distance(fx, f.evaluate(y)) / h);
            }
            stride *= counts[i];
        }
    }

    Rng rng(mix_seed(f.seed_, 0x11b));
    for (std::size_t k = 0; k < f.random_pairs_; ++k) {
        Vec x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.uniform(dom.lower(i), dom.upper(i));
            y[i] = rng.uniform(dom.lower(i), dom.upper(i));
            if (table) {
                const double top = static_cast<double>(counts[i] - 1);
                x[i] = lo[i] + std::clamp(std::round((x[i] - lo[i]) / h), 0.0, top) * h;
                y[i] = lo[i] + std::clamp(std::round((y[i] - lo[i]) / h), 0.0, top) * h;
            }
        }
        const double dx = dist2(x, y);
        if (dx <= 1e-12 * dom.side()) continue;
        best = std::max(best, f.distance_at(x, y) / dx);
    }
    return best;
}

inline void check_resolution(const DyadicCube& root, double h, double margin, const SamplingOptions& opts) {
    if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid step must be positive");
    if (!(margin >= 1.0)) throw Error(ErrorCode::InvalidArgument, "margin must be at least 1");
    const double steps = margin * root.side() / h;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
        throw Error(ErrorCode::InvalidArgument, "grid step must divide the enlarged root side");
    const int depth = opts.analysis_depth.value_or(0);
    if (std::ldexp(root.side(), -depth) / h < 8.0 * (1.0 - 1e-12))
        throw Error(ErrorCode::ResolutionTooCoarse, "fewer than 8 samples per analyzed cube side");
}

// Sampling margin that keeps 7 * (3 Q^N) inside the data for every Q below
// the root (ancestors are clamped to the root).
inline double required_margin(int /*ancestor_depth*/) { return 21.0; }

inline SampledMap sample_map(const MapSpec& spec, const DyadicCube& root, double h, double margin,
                             const SamplingOptions& opts = {}) {
    if (spec.dim() != root.dim()) throw Error(ErrorCode::InvalidArgument, "map and root dimensions differ");
    check_resolution(root, h, margin, opts);
    SampledMap f;
    f.root_ = root;
    f.margin_ = margin;
    f.h_ = h;
    f.backend_ = spec.backend();
    f.spec_ = spec;
    f.l_spec_ = spec.lipschitz_bound();
    f.seed_ = opts.seed;
    f.random_pairs_ = opts.random_pairs;
    f.l_hat_ = lipschitz_estimate(f);
    return f;
}

inline SampledMap sampled_from_table(GridTable table, std::shared_ptr<const MetricBackend> backend,
                                     const DyadicCube& root, const SamplingOptions& opts = {}) {
    const std::size_t n = root.dim();
    if (table.dim() != n) throw Error(ErrorCode::InvalidArgument, "table and root dimensions differ");
    // Largest margin such that root.dilate(margin) stays inside the table.
    const Vec c = root.center();
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = table.origin[i];
        const double hi = lo + static_cast<double>(table.counts[i] - 1) * table.h;
        margin = std::min(margin, std::min(c[i] - lo, hi - c[i]) / (0.5 * root.side()));
    }
    if (!(margin >= 1.0 - 1e-9)) throw Error(ErrorCode::OutOfDomain, "table does not cover the root cube");
    margin = std::max(1.0, margin);
    SamplingOptions o = opts;
    const int depth = o.analysis_depth.value_or(0);
    if (std::ldexp(root.side(), -depth) / table.h < 8.0 * (1.0 - 1e-12))
        throw Error(ErrorCode::ResolutionTooCoarse, "fewer than 8 samples per analyzed cube side");
    SampledMap f;
    f.root_ = root;
    f.margin_ = margin;
    f.h_ = table.h;
    f.backend_ = std::move(backend);
    f.table_ = std::make_shared<const GridTable>(std::move(table));
    f.seed_ = o.seed;
    f.random_pairs_ = o.random_pairs;
    // Adjacent-node scan over the table proper; random pairs snap to nodes.
    f.l_hat_ = lipschitz_estimate(f);
    return f;
}

// x -> (x, f(x)) into R^n x M with the metric sqrt(|du|_2^2 + d(v, v')^2).
inline SampledMap lift_map(const SampledMap& f) {
    SampledMap g;
    g.root_ = f.root_;
    g.margin_ = f.margin_;
    g.h_ = f.h_;
    g.backend_ = MetricBackend::lifted(f.backend_);
    g.inner_ = std::make_shared<const SampledMap>(f);
    if (f.l_spec_) g.l_spec_ = std::hypot(1.0, *f.l_spec_);
    g.seed_ = f.seed_;
    g.random_pairs_ = f.random_pairs_;
    g.l_hat_ = lipschitz_estimate(g);
    return g;
}

// CSV with n domain columns followed by either m value columns (sup-norm
// target) or one integer column indexing `matrix`. Rows must fill a regular
// grid. Lines starting with '#' and a non-numeric header row are skipped.
inline GridTable parse_map_csv(std::istream& in, std::size_t n, const DistanceMatrix* matrix, std::size_t& value_dim) {
    std::vector<Vec> xs;
    std::vector<Vec> vals;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                row.push_back(std::stod(cell, &pos));
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;
            }
            throw Error(ErrorCode::InvalidArgument, "non-numeric CSV row: " + line);
        }
        first = false;
        if (row.size() <= n) throw Error(ErrorCode::InvalidArgument, "CSV row has no value columns");
        xs.emplace_back(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(n));
        vals.emplace_back(row.begin() + static_cast<std::ptrdiff_t>(n), row.end());
    }
    if (xs.size() < 2) throw Error(ErrorCode::InvalidArgument, "CSV map needs at least two rows");
    value_dim = vals.front().size();
    if (matrix && value_dim != 1) throw Error(ErrorCode::InvalidArgument, "index CSV needs exactly one value column");

    GridTable t;
    t.origin = Vec(n, std::numeric_limits<double>::infinity());
    Vec hi(n, -std::numeric_limits<double>::infinity());
    for (const Vec& x : xs)
        for (std::size_t i = 0; i < n; ++i) {
            t.origin[i] = std::min(t.origin[i], x[i]);
            hi[i] = std::max(hi[i], x[i]);
        }
    // Step: smallest positive gap along any axis.
    double h = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> c;
        c.reserve(xs.size());
        for (const Vec& x : xs) c.push_back(x[i]);
        std::sort(c.begin(), c.end());
        for (std::size_t k = 1; k < c.size(); ++k)
            if (c[k] - c[k - 1] > 1e-12) h = std::min(h, c[k] - c[k - 1]);
    }
    if (!std::isfinite(h)) throw Error(ErrorCode::InvalidArgument, "CSV grid is degenerate");
    t.h = h;
    t.counts.resize(n);
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) {
        t.counts[i] = static_cast<std::size_t>(std::llround((hi[i] - t.origin[i]) / h)) + 1;
        total *= t.counts[i];
    }
    if (total != xs.size()) throw Error(ErrorCode::InvalidArgument, "CSV rows do not fill a regular grid");
    t.values.assign(total, Point{});
    std::vector<bool> seen(total, false);
    for (std::size_t r = 0; r < xs.size(); ++r) {
        const auto idx = t.nearest(xs[r]);
        if (!idx || seen[*idx]) throw Error(ErrorCode::InvalidArgument, "CSV rows do not fill a regular grid");
        seen[*idx] = true;
        if (matrix) {
            const double v = vals[r][0];
            if (v < 0 || v != std::floor(v) || static_cast<std::size_t>(v) >= matrix->size())
                throw Error(ErrorCode::InvalidArgument, "bad distance-matrix index in CSV");
            t.values[*idx] = Point::index(static_cast<std::size_t>(v));
        } else {
            if (vals[r].size() != value_dim) throw Error(ErrorCode::InvalidArgument, "ragged CSV value columns");
            t.values[*idx] = Point::vector(vals[r]);
        }
    }
    return t;
}

inline SampledMap load_map_csv(const std::string& path, const DyadicCube& root, const std::string& matrix_path = {},
                               const SamplingOptions& opts = {}) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open map CSV " + path);
    std::optional<DistanceMatrix> matrix;
    if (!matrix_path.empty()) matrix = DistanceMatrix::load(matrix_path);
    std::size_t value_dim = 0;
    GridTable t = parse_map_csv(in, root.dim(), matrix ? &*matrix : nullptr, value_dim);
    auto backend = matrix ? MetricBackend::matrix(std::move(*matrix)) : MetricBackend::sup_norm(value_dim);
    return sampled_from_table(std::move(t), std::move(backend), root, opts);
}

}  // namespace metricdiff
