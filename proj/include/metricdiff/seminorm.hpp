#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "metricdiff/core.hpp"
#include "metricdiff/corpus.hpp"
#include "metricdiff/dyadic.hpp"
#include "metricdiff/hull.hpp"
#include "metricdiff/lp.hpp"
#include "metricdiff/polyhedral.hpp"

namespace metricdiff {

// ---------------------------------------------------------------------------
// Parameters

// Left side of the closing estimate of the construction:
// sqrt(n) a' / (1 - a') + (2 + sqrt(n)) a, with a' = 2(n+1) a.
inline double md_error_bound(double alpha, std::size_t n) {
    const double ap = 2.0 * static_cast<double>(n + 1) * alpha;
    if (ap >= 1.0) return std::numeric_limits<double>::infinity();
    const double rn = std::sqrt(static_cast<double>(n));
    return rn * ap / (1.0 - ap) + (2.0 + rn) * alpha;
}

// Largest alpha (to bisection accuracy, strictly inside) with
// md_error_bound(alpha, n) < delta.
inline double auto_alpha(double delta, std::size_t n) {
    if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be positive");
    double lo = 0.0, hi = 1.0 / (2.0 * static_cast<double>(n + 1));
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (md_error_bound(mid, n) < delta ? lo : hi) = mid;
    }
    return lo;
}

struct AnalysisParams {
    std::size_t n = 1;
    double alpha = 0.0;           // separation fraction; 0 means derive from delta
    int ancestor_depth = 2;       // N
    double delta = 0.25;          // md threshold (relative to L)
    double epsilon = 1e-3;        // beta threshold
    double sigma_floor = 1e-3;    // relative to L_hat
    std::size_t directions = 0;   // 0: 2 for n=1, 64 for n=2, 98 for n>=3
    std::size_t chord_points = 128;
    std::size_t grid_nodes = 0;   // per axis; 0: 33 for n=1, 9 otherwise
    std::size_t pair_points = 0;  // low-discrepancy points; 0: 32 for n=1, 48 otherwise
    std::size_t fit_functionals = 0;  // K; 0 means 2n
    std::size_t fit_iterations = 30;
    std::size_t fit_starts = 4;       // seeded random starts besides the supplied ones
    std::size_t fit_pairs = 400;
    std::uint64_t seed = 1;

    static AnalysisParams for_dimension(std::size_t n, double delta = 0.25) {
        AnalysisParams p;
        p.n = n;
        p.delta = delta;
        p.alpha = auto_alpha(delta, n);
        return p;
    }

    double alpha_value() const { return alpha > 0.0 ? alpha : auto_alpha(delta, n); }
    double alpha_prime() const { return 2.0 * static_cast<double>(n + 1) * alpha_value(); }
    double epsilon_prime() const { return alpha_value(); }
    double rho() const { return alpha_value(); }
    std::size_t direction_count() const { return directions ? directions : (n == 1 ? 2 : n == 2 ? 64 : 98); }
    std::size_t grid_count() const { return grid_nodes ? grid_nodes : (n == 1 ? 33 : 9); }
    std::size_t lowdisc_count() const { return pair_points ? pair_points : (n == 1 ? 32 : 48); }
    std::size_t functional_count() const { return fit_functionals ? fit_functionals : 2 * n; }

    void validate() const {
        const double a = alpha_value();
        if (!(a > 0.0 && a < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
        if (!(md_error_bound(a, n) < delta))
            throw Error(ErrorCode::InvalidArgument, "alpha too large for delta: the closing estimate exceeds delta");
        if (ancestor_depth < 0) throw Error(ErrorCode::InvalidArgument, "N must be nonnegative");
        if (direction_count() < 2 || direction_count() % 2) throw Error(ErrorCode::InvalidArgument, "direction count must be even");
        if (chord_points < 2) throw Error(ErrorCode::InvalidArgument, "need at least two chord points");
    }
};

// ---------------------------------------------------------------------------
// sigma

namespace detail {

inline std::pair<double, double> clip_to_box(const Box& b, const Vec& p, const Vec& u) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < b.dim(); ++i) {
        if (std::abs(u[i]) < 1e-15) {
            if (p[i] < b.lower(i) || p[i] > b.upper(i)) return {0.0, 0.0};
            continue;
        }
        double t0 = (b.lower(i) - p[i]) / u[i];
        double t1 = (b.upper(i) - p[i]) / u[i];
        if (t0 > t1) std::swap(t0, t1);
        lo = std::max(lo, t0);
        hi = std::min(hi, t1);
    }
    return {lo, hi};
}

}  // namespace detail

/// Minimum of d(f(x'), f(y')) / |x' - y'| over pairs of `points` equispaced
/// nodes on the chord {p + t u} inside `window`, among pairs at least
/// `separation` apart.
inline double sigma_on_line(const SampledMap& f, const Box& window, const Vec& p, const Vec& u, double separation,
                            std::size_t points) {
    const auto [t0, t1] = detail::clip_to_box(window, p, u);
    const double len = t1 - t0;
    if (!(len >= separation * (1.0 - 1e-12)) || len <= 0.0)
        throw Error(ErrorCode::ShortChord, "chord in 3Q^N shorter than alpha side(Q)");
    std::vector<Point> vals;
    vals.reserve(points);
    const double dt = len / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) vals.push_back(f.evaluate(axpy(p, t0 + dt * static_cast<double>(i), u)));
    const PointBatch dist(*f.backend(), vals);
    const auto min_gap = static_cast<std::size_t>(std::ceil(separation / dt * (1.0 - 1e-12)));
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points; ++i)
        for (std::size_t j = i + std::max<std::size_t>(1, min_gap); j < points; ++j)
            best = std::min(best, dist(i, j) / (dt * static_cast<double>(j - i)));
    if (!std::isfinite(best)) throw Error(ErrorCode::ShortChord, "no admissible pair on the chord");
    return best;
}

// The window 3 Q^N, with Q^N clamped to the level-0 cube of Q's grid.
inline Box sigma_window(const DyadicCube& q, int ancestor_depth) {
    return ancestor_clamped(q, ancestor_depth).cube.dilate(3.0);
}

inline double sigma(const SampledMap& f, const DyadicCube& q, const Vec& x, const Vec& y, const AnalysisParams& p) {
    const double sep = p.alpha_value() * q.side();
    const double d = dist2(x, y);
    if (d < sep * (1.0 - 1e-12)) throw Error(ErrorCode::PointsTooClose, "|x - y| < alpha side(Q)");
    const Box window = sigma_window(q, p.ancestor_depth);
    f.require_covers(window, "3Q^N");
    return sigma_on_line(f, window, x, scale(sub(y, x), 1.0 / d), sep, p.chord_points);
}

// ---------------------------------------------------------------------------
// Star profiles

struct StarProfile {
    std::vector<Vec> directions;  // unit vectors; the second half negates the first
    std::vector<double> radii;    // 1/sigma, +inf for degenerate directions

    std::size_t dim() const { return directions.empty() ? 0 : directions.front().size(); }
};

// `count` unit vectors: count/2 spread over a hemisphere followed by their
// negatives.
inline std::vector<Vec> profile_directions(std::size_t n, std::size_t count) {
    const std::size_t half = count / 2;
    std::vector<Vec> dirs;
    dirs.reserve(count);
    if (n == 1) {
        dirs.push_back(Vec{1.0});
    } else if (n == 2) {
        for (std::size_t k = 0; k < half; ++k) {
            const double th = std::numbers::pi * static_cast<double>(k) / static_cast<double>(half);
            dirs.push_back(Vec{std::cos(th), std::sin(th)});
        }
    } else {
        // Coordinate axes first, then a Fibonacci spiral on the upper half
        // sphere (extra coordinates of higher n are left at zero).
        for (std::size_t e = 0; e < n && dirs.size() < half; ++e) {
            Vec v(n, 0.0);
            v[e] = 1.0;
            dirs.push_back(v);
        }
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        const std::size_t rest = half - dirs.size();
        for (std::size_t k = 0; k < rest; ++k) {
            const double z = 1.0 - (static_cast<double>(k) + 0.5) / static_cast<double>(rest);
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            Vec v(n, 0.0);
            v[0] = r * std::cos(golden * static_cast<double>(k));
            v[1] = r * std::sin(golden * static_cast<double>(k));
            v[2] = z;
            dirs.push_back(v);
        }
    }
    const std::size_t first = dirs.size();
    for (std::size_t k = 0; k < first; ++k) dirs.push_back(scale(dirs[k], -1.0));
    return dirs;
}

/// Radii 1/sigma along lines through the center of Q, sigma taken on the
/// chord in 3Q^N. sigma depends only on the line, so u and -u share it.
inline StarProfile build_star_profile(const SampledMap& f, const DyadicCube& q, const AnalysisParams& p) {
    const std::size_t n = q.dim();
    const Box window = sigma_window(q, p.ancestor_depth);
    f.require_covers(window, "3Q^N");
    const double sep = p.alpha_value() * q.side();
    const double floor = p.sigma_floor * f.lipschitz();
    StarProfile s;
    s.directions = profile_directions(n, p.direction_count());
    const std::size_t half = s.directions.size() / 2;
    s.radii.assign(s.directions.size(), std::numeric_limits<double>::infinity());
    const Vec c = q.center();
    auto radius = [&](double sg) { return sg <= floor ? std::numeric_limits<double>::infinity() : 1.0 / sg; };
    std::vector<double> sg(half);
    for (std::size_t k = 0; k < half; ++k) {
        sg[k] = sigma_on_line(f, window, c, s.directions[k], sep, p.chord_points);
        s.radii[k] = s.radii[k + half] = radius(sg[k]);
    }
    if (n != 2 || half < 2) return s;

    // In the plane, locate the minimizing angle next to the smallest sampled
    // sigma by golden-section search and add that direction pair. A kernel
    // direction between two samples is then found instead of bridged.
    const std::size_t kmin = static_cast<std::size_t>(std::min_element(sg.begin(), sg.end()) - sg.begin());
    if (std::isinf(s.radii[kmin])) return s;
    const double step = std::numbers::pi / static_cast<double>(half);
    const double th = std::atan2(s.directions[kmin][1], s.directions[kmin][0]);
    auto sigma_at = [&](double t) {
        return sigma_on_line(f, window, c, Vec{std::cos(t), std::sin(t)}, sep, p.chord_points);
    };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = th - step, hi = th + step;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = sigma_at(x1), f2 = sigma_at(x2);
    for (int it = 0; it < 28; ++it) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = sigma_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = sigma_at(x2);
        }
    }
    const double best_t = f1 <= f2 ? x1 : x2;
    const double best = std::min(f1, f2);
    if (!(best < sg[kmin])) return s;
    const Vec u{std::cos(best_t), std::sin(best_t)};
    StarProfile out;
    for (std::size_t k = 0; k < half; ++k) out.directions.push_back(s.directions[k]);
    out.directions.push_back(u);
    for (std::size_t k = 0; k < half; ++k) out.directions.push_back(s.directions[k + half]);
    out.directions.push_back(scale(u, -1.0));
    out.radii.assign(out.directions.size(), 0.0);
    for (std::size_t k = 0; k < half; ++k) out.radii[k] = out.radii[k + half + 1] = s.radii[k];
    out.radii[half] = out.radii[2 * half + 1] = radius(best);
    return out;
}

// ---------------------------------------------------------------------------
// Gauge of the hull

struct GaugeResult {
    double value = 0.0;
    Vec support;            // functional a with <a, x> = value and |<a, v>| <= 1 on the hull
    bool empty_body = false;  // every radius infinite: gauge identically 0
    bool feasible = true;     // false: x outside the span of the hull and recession directions
};

/// Minkowski functional of co{+-r_i u_i : r_i finite} + span{u_i : r_i = inf}
/// at x, from  min t  s.t.  x = sum lambda_i v_i + sum mu_j u_j,
/// lambda >= 0, sum lambda = t, mu free. The LP duals give a supporting
/// functional at x.
inline GaugeResult gauge_with_support(const StarProfile& s, const Vec& x) {
    const std::size_t n = x.size();
    if (s.directions.size() < 2 * (n + 1))
        throw Error(ErrorCode::InvalidArgument, "star profile needs at least 2(n+1) directions");
    GaugeResult g;
    g.support.assign(n, 0.0);
    std::vector<Vec> hullpts, recess;
    for (std::size_t i = 0; i < s.directions.size(); ++i) {
        if (std::isfinite(s.radii[i])) hullpts.push_back(scale(s.directions[i], s.radii[i]));
        else recess.push_back(s.directions[i]);
    }
    if (hullpts.empty()) {
        g.empty_body = true;
        return g;
    }
    if (norm2(x) == 0.0) return g;
    const std::size_t cols = hullpts.size() + 2 * recess.size();
    std::vector<double> a(n * cols);
    Vec c(cols, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = 0;
        for (const Vec& v : hullpts) a[i * cols + j++] = v[i];
        for (const Vec& u : recess) {
            a[i * cols + j++] = u[i];
            a[i * cols + j++] = -u[i];
        }
    }
    for (std::size_t j = 0; j < hullpts.size(); ++j) c[j] = 1.0;
    const lp::Result r = lp::solve(n, cols, a, x, c);
    if (r.status == lp::Status::Infeasible) {
        g.feasible = false;
        g.value = std::numeric_limits<double>::infinity();
        return g;
    }
    if (r.status != lp::Status::Optimal) throw Error(ErrorCode::InvalidArgument, "gauge LP did not converge");
    g.value = std::max(0.0, r.objective);
    g.support = r.duals;
    return g;
}

inline double gauge_of_hull(const StarProfile& s, const Vec& x) { return gauge_with_support(s, x).value; }

// ---------------------------------------------------------------------------
// Caratheodory

struct ConvexCombination {
    std::vector<std::size_t> indices;
    Vec weights;
};

/// Writes x as a convex combination of at most n+1 of the points, or returns
/// nothing if x is outside their hull. A basic feasible solution of the
/// (n+1)-row feasibility program has at most n+1 nonzeros.
inline std::optional<ConvexCombination> caratheodory_membership(const std::vector<Vec>& points, const Vec& x,
                                                               double tol = 1e-9) {
    if (points.empty()) throw Error(ErrorCode::InvalidArgument, "empty point set");
    const std::size_t n = x.size();
    const std::size_t cols = points.size();
    const std::size_t rows = n + 1;
    std::vector<double> a(rows * cols);
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t i = 0; i < n; ++i) a[i * cols + j] = points[j][i];
        a[n * cols + j] = 1.0;
    }
    Vec b(x);
    b.push_back(1.0);
    const lp::Result r = lp::solve(rows, cols, a, b, Vec(cols, 0.0));
    if (r.status != lp::Status::Optimal) return std::nullopt;
    ConvexCombination cc;
    for (std::size_t j = 0; j < cols; ++j) {
        if (r.x[j] > 1e-14) {
            cc.indices.push_back(j);
            cc.weights.push_back(r.x[j]);
        }
    }
    Vec recon(n, 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < cc.indices.size(); ++k) {
        recon = axpy(recon, cc.weights[k], points[cc.indices[k]]);
        total += cc.weights[k];
    }
    double scale_ = 1.0;
    for (const Vec& p : points) scale_ = std::max(scale_, norm_inf(p));
    if (dist2(recon, x) > tol * scale_ || std::abs(total - 1.0) > tol) return std::nullopt;
    return cc;
}

// ---------------------------------------------------------------------------
// Seminorm construction

/// Polyhedral seminorm equal to the gauge of the profile's hull: facets of the
/// hull after quotienting out the recession directions (exact for quotient
/// dimension <= 3), supporting functionals at the profile's boundary points
/// otherwise.
inline PolyhedralSeminorm seminorm_from_profile(const StarProfile& s) {
    const std::size_t n = s.dim();
    std::vector<Vec> finite, recess;
    for (std::size_t i = 0; i < s.directions.size(); ++i) {
        if (std::isfinite(s.radii[i])) finite.push_back(scale(s.directions[i], s.radii[i]));
        else recess.push_back(s.directions[i]);
    }
    const auto rbasis = hull::orthonormal_span(recess);
    const auto cbasis = hull::complement(rbasis, n);
    const std::size_t k = cbasis.size();
    if (k == 0 || finite.empty()) return PolyhedralSeminorm::zero(n);

    std::vector<Vec> proj;
    proj.reserve(finite.size());
    for (const Vec& v : finite) {
        Vec w(k);
        for (std::size_t d = 0; d < k; ++d) w[d] = dot(v, cbasis[d]);
        proj.push_back(std::move(w));
    }
    std::vector<Vec> facets;
    if (k == 1) {
        double m = 0.0;
        for (const Vec& w : proj) m = std::max(m, std::abs(w[0]));
        if (m > 0.0) facets.push_back(Vec{1.0 / m});
    } else if (k == 2) {
        facets = hull::symmetric_facets_2d(proj);
    } else if (k == 3) {
        facets = hull::symmetric_facets_3d(proj);
    }
    std::vector<Vec> functionals;
    if (k <= 3) {
        for (const Vec& a : facets) {
            Vec full(n, 0.0);
            for (std::size_t d = 0; d < k; ++d) full = axpy(full, a[d], cbasis[d]);
            functionals.push_back(std::move(full));
        }
    } else {
        for (const Vec& v : finite) {
            GaugeResult g = gauge_with_support(s, v);
            if (g.feasible && !g.empty_body) functionals.push_back(std::move(g.support));
        }
    }
    return PolyhedralSeminorm(n, std::move(functionals));
}

inline PolyhedralSeminorm construct_seminorm(const SampledMap& f, const DyadicCube& q, const AnalysisParams& p) {
    return seminorm_from_profile(build_star_profile(f, q, p));
}

// ---------------------------------------------------------------------------
// Minimax fitting

struct DistancePair {
    Vec displacement;
    double target = 0.0;
};

inline double sup_residual(const PolyhedralSeminorm& s, const std::vector<DistancePair>& pairs) {
    double m = 0.0;
    for (const auto& pr : pairs) m = std::max(m, std::abs(s(pr.displacement) - pr.target));
    return m;
}

/// Chebyshev fit of <a, d_i> ~ y_i: minimize max_i |<a, d_i> - y_i| over a.
/// Solved through the dual program
///   min sum y_i (p_i - q_i)  s.t.  sum (p_i - q_i) d_i = 0,  sum (p_i + q_i) = 1
/// whose row multipliers are (a, -error).
inline std::optional<Vec> chebyshev_fit(const std::vector<Vec>& d, const Vec& y) {
    const std::size_t count = d.size();
    if (count == 0) return std::nullopt;
    const std::size_t n = d.front().size();
    const std::size_t rows = n + 1, cols = 2 * count;
    std::vector<double> a(rows * cols);
    Vec c(cols);
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t r = 0; r < n; ++r) {
            a[r * cols + i] = d[i][r];
            a[r * cols + count + i] = -d[i][r];
        }
        a[n * cols + i] = 1.0;
        a[n * cols + count + i] = 1.0;
        c[i] = y[i];
        c[count + i] = -y[i];
    }
    Vec b(rows, 0.0);
    b[n] = 1.0;
    const lp::Result r = lp::solve(rows, cols, a, b, c);
    if (r.status != lp::Status::Optimal) return std::nullopt;
    return Vec(r.duals.begin(), r.duals.begin() + static_cast<std::ptrdiff_t>(n));
}

struct FitResult {
    PolyhedralSeminorm seminorm;
    double residual = 0.0;
    std::size_t iterations = 0;
};

namespace detail {

// Choose K functionals from a start: the ones achieving the max on the most
// pairs, padded with small multiples of the best one.
inline std::vector<Vec> trim_start(const PolyhedralSeminorm& s, const std::vector<DistancePair>& pairs, std::size_t k) {
    std::vector<Vec> f = s.functionals();
    if (f.empty()) return {};
    if (f.size() > k) {
        std::vector<std::size_t> wins(f.size(), 0);
        for (const auto& pr : pairs) ++wins[s.argmax(pr.displacement)];
        std::vector<std::size_t> order(f.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return wins[a] > wins[b]; });
        std::vector<Vec> kept;
        for (std::size_t i = 0; i < k; ++i) kept.push_back(f[order[i]]);
        f = std::move(kept);
    }
    return f;
}

// Adds to `work` the pairs of `all` (not yet used) with the largest residual
// under s. Returns the number added.
inline std::size_t add_violators(const PolyhedralSeminorm& s, const std::vector<DistancePair>& all,
                                 std::vector<bool>& used, std::vector<DistancePair>& work, std::size_t count) {
    if (work.size() >= all.size()) return 0;
    std::vector<std::pair<double, std::size_t>> r;
    r.reserve(all.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        if (!used[i]) r.emplace_back(std::abs(s(all[i].displacement) - all[i].target), i);
    const std::size_t take = std::min(count, r.size());
    std::partial_sort(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(take), r.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    for (std::size_t k = 0; k < take; ++k) {
        used[r[k].second] = true;
        work.push_back(all[r[k].second]);
    }
    return take;
}

inline FitResult alternate(std::vector<Vec> funcs, std::size_t n, const std::vector<std::size_t>& initial,
                           const std::vector<DistancePair>& all, std::size_t budget) {
    FitResult best{PolyhedralSeminorm(n, funcs), 0.0, 0};
    best.residual = sup_residual(best.seminorm, all);
    // Working set: the subsample plus the worst pairs seen so far (exchange).
    std::vector<bool> used(all.size(), false);
    std::vector<DistancePair> fit_set;
    for (std::size_t i : initial) {
        if (used[i]) continue;
        used[i] = true;
        fit_set.push_back(all[i]);
    }
    const std::size_t batch = std::max<std::size_t>(8, 4 * funcs.size());
    double top = 0.0;
    for (const auto& pr : all) top = std::max(top, pr.target);
    for (std::size_t it = 0; it < budget; ++it) {
        if (best.residual <= 1e-12 * top) break;
        const PolyhedralSeminorm cur(n, funcs);
        const std::size_t added = add_violators(cur, all, used, fit_set, batch);
        std::vector<std::vector<Vec>> ds(funcs.size());
        std::vector<Vec> ys(funcs.size());
        for (const auto& pr : fit_set) {
            const std::size_t k = cur.argmax(pr.displacement);
            Vec d = pr.displacement;
            if (dot(funcs[k], d) < 0.0) d = scale(d, -1.0);
            ds[k].push_back(std::move(d));
            ys[k].push_back(pr.target);
        }
        std::vector<Vec> next = funcs;
        bool idle = false;
        for (std::size_t k = 0; k < funcs.size(); ++k) {
            if (ds[k].empty()) {
                idle = true;
                continue;
            }
            if (auto a = chebyshev_fit(ds[k], ys[k])) next[k] = std::move(*a);
        }
        PolyhedralSeminorm cand(n, next);
        double res = sup_residual(cand, all);
        if (idle) {
            // A functional that achieves no max can still mask the refitted
            // ones; try retiring it.
            std::vector<Vec> retired = next;
            for (std::size_t k = 0; k < funcs.size(); ++k)
                if (ds[k].empty()) retired[k].assign(n, 0.0);
            PolyhedralSeminorm alt(n, retired);
            const double r2 = sup_residual(alt, all);
            if (r2 < res) {
                res = r2;
                cand = std::move(alt);
                next = std::move(retired);
            }
        }
        // Full step rejected: try damped steps toward the refit.
        for (double t = 0.5; !(res < best.residual - 1e-15) && t > 1e-3; t *= 0.5) {
            std::vector<Vec> mid = funcs;
            for (std::size_t k = 0; k < funcs.size(); ++k) mid[k] = axpy(funcs[k], t, sub(next[k], funcs[k]));
            PolyhedralSeminorm alt(n, mid);
            const double r2 = sup_residual(alt, all);
            if (r2 < res) {
                res = r2;
                cand = std::move(alt);
                next = std::move(mid);
            }
        }
        if (!(res < best.residual - 1e-15)) {
            if (added > 0) continue;
            break;
        }
        best = {std::move(cand), res, it + 1};
        funcs = std::move(next);
    }
    return best;
}

}  // namespace detail

/// Alternating minimax fit of a K-functional polyhedral seminorm to
/// (displacement, distance) pairs: assign each pair to the functional that
/// achieves the max, refit each functional by Chebyshev regression, and keep
/// the step only if the sup residual over all pairs drops. Runs from every
/// supplied start plus one seeded random start and returns the best.
inline FitResult fit_seminorm(const std::vector<DistancePair>& pairs, std::size_t k, const AnalysisParams& p,
                              const std::vector<PolyhedralSeminorm>& starts = {}) {
    if (pairs.empty()) throw Error(ErrorCode::InsufficientPairs, "no pairs to fit");
    const std::size_t n = pairs.front().displacement.size();
    if (k == 0) k = 2 * n;
    if (pairs.size() < k * (n + 1)) throw Error(ErrorCode::InsufficientPairs, "need at least K(n+1) pairs");

    bool all_zero = true;
    for (const auto& pr : pairs) all_zero = all_zero && pr.target == 0.0;
    if (all_zero) return {PolyhedralSeminorm::zero(n), 0.0, 0};

    std::vector<std::size_t> fit_set;
    if (pairs.size() > p.fit_pairs && p.fit_pairs > 0) {
        const double stride = static_cast<double>(pairs.size()) / static_cast<double>(p.fit_pairs);
        for (std::size_t i = 0; i < p.fit_pairs; ++i) fit_set.push_back(static_cast<std::size_t>(stride * static_cast<double>(i)));
    } else {
        for (std::size_t i = 0; i < pairs.size(); ++i) fit_set.push_back(i);
    }

    std::vector<std::vector<Vec>> inits;
    for (const auto& s : starts) {
        auto f = detail::trim_start(s, pairs, k);
        if (!f.empty()) inits.push_back(std::move(f));
    }
    {
        // Random start scaled to the typical distance ratio.
        std::vector<double> ratios;
        for (const auto& pr : pairs) {
            const double len = norm2(pr.displacement);
            if (len > 0.0) ratios.push_back(pr.target / len);
        }
        std::nth_element(ratios.begin(), ratios.begin() + static_cast<std::ptrdiff_t>(ratios.size() / 2), ratios.end());
        const double scale_ = ratios.empty() ? 1.0 : ratios[ratios.size() / 2];
        Rng rng(mix_seed(p.seed, 0xf17));
        for (std::size_t s = 0; s < std::max<std::size_t>(1, p.fit_starts); ++s) {
            std::vector<Vec> f;
            for (std::size_t i = 0; i < k; ++i) f.push_back(scale(rng.unit_vector(n), scale_));
            inits.push_back(std::move(f));
        }
    }

    double top = 0.0;
    for (const auto& pr : pairs) top = std::max(top, pr.target);
    FitResult best{PolyhedralSeminorm::zero(n), sup_residual(PolyhedralSeminorm::zero(n), pairs), 0};
    for (auto& init : inits) {
        FitResult r = detail::alternate(std::move(init), n, fit_set, pairs, p.fit_iterations);
        if (r.residual < best.residual) best = std::move(r);
        if (best.residual <= 1e-12 * top) break;
    }
    return best;
}

// ---------------------------------------------------------------------------
// md

/// Sample points on a box: a regular grid (nodes at both faces) plus Halton
/// points.
inline std::vector<Vec> md_sample_points(const Box& b, const AnalysisParams& p) {
    const std::size_t n = b.dim();
    const std::size_t g = std::max<std::size_t>(2, p.grid_count());
    std::vector<Vec> pts;
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= g;
    for (std::size_t idx = 0; idx < total; ++idx) {
        Vec x(n);
        std::size_t rest = idx;
        for (std::size_t i = n; i-- > 0;) {
            x[i] = b.lower(i) + b.side() * static_cast<double>(rest % g) / static_cast<double>(g - 1);
            rest /= g;
        }
        pts.push_back(std::move(x));
    }
    for (std::size_t k = 0; k < p.lowdisc_count(); ++k) {
        Vec h = halton(k, n);
        for (std::size_t i = 0; i < n; ++i) h[i] = b.lower(i) + b.side() * h[i];
        pts.push_back(std::move(h));
    }
    return pts;
}

inline std::vector<DistancePair> md_pairs(const SampledMap& f, const Box& b, const AnalysisParams& p) {
    f.require_covers(b, "md region");
    const auto pts = md_sample_points(b, p);
    std::vector<Point> vals;
    vals.reserve(pts.size());
    for (const Vec& x : pts) vals.push_back(f.evaluate(x));
    const PointBatch dist(*f.backend(), vals);
    std::vector<DistancePair> pairs;
    pairs.reserve(pts.size() * (pts.size() - 1) / 2);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            pairs.push_back({sub(pts[i], pts[j]), dist(i, j)});
    return pairs;
}

enum class CandidateKind { Zero, Supplied, Constructed, Fitted };

inline const char* to_string(CandidateKind k) {
    switch (k) {
    case CandidateKind::Zero: return "zero";
    case CandidateKind::Supplied: return "supplied";
    case CandidateKind::Constructed: return "constructed";
    case CandidateKind::Fitted: return "fitted";
    }
    return "?";
}

struct MdResult {
    double value = 0.0;  // sup deviation / side
    PolyhedralSeminorm seminorm;
    CandidateKind kind = CandidateKind::Zero;
};

/// Upper bound for md on the box: best sup deviation over sampled pairs among
/// the zero seminorm, the supplied candidates (taken as constructed ones) and
/// a minimax fit seeded by them, divided by the box side.
inline MdResult md_estimate(const SampledMap& f, const Box& b, const std::vector<PolyhedralSeminorm>& candidates,
                            const AnalysisParams& p) {
    const auto pairs = md_pairs(f, b, p);
    const std::size_t n = b.dim();
    MdResult best{sup_residual(PolyhedralSeminorm::zero(n), pairs), PolyhedralSeminorm::zero(n), CandidateKind::Zero};
    double scale_ = 0.0;
    for (const auto& pr : pairs) scale_ = std::max(scale_, pr.target);
    for (const auto& c : candidates) {
        const double r = sup_residual(c, pairs);
        if (r < best.value) best = {r, c, CandidateKind::Constructed};
    }
    // A supplied candidate that already reproduces the data to rounding
    // leaves nothing for the fit to improve.
    if (best.value > 1e-12 * std::max(1.0, scale_)) {
        const std::size_t k = p.functional_count();
        if (pairs.size() >= k * (n + 1)) {
            FitResult fr = fit_seminorm(pairs, k, p, candidates);
            if (fr.residual < best.value) best = {fr.residual, std::move(fr.seminorm), CandidateKind::Fitted};
        }
    }
    best.value /= b.side();
    return best;
}

/// md of lambda * Q, with the construction's seminorm for Q among the
/// candidates.
inline MdResult md_estimate(const SampledMap& f, const DyadicCube& q, double dilation, const AnalysisParams& p) {
    std::vector<PolyhedralSeminorm> cands{construct_seminorm(f, q, p)};
    return md_estimate(f, q.dilate(dilation), cands, p);
}

struct Md1dResult {
    double value = 0.0;  // sup deviation / side
    double coefficient = 0.0;
};

/// Exact 1-D md: seminorms on R are c|.|, and c -> sup |d - c|dx|| over grid
/// pairs is convex, so ternary search on [0, L] finds the optimum.
/// Same, over all pairs of the given points of [a, b].
inline Md1dResult md_exact_1d_points(const SampledMap& f, double a, double b, const std::vector<double>& xs) {
    if (f.dim() != 1) throw Error(ErrorCode::InvalidArgument, "md_exact_1d needs n = 1");
    if (!(b > a) || xs.size() < 2) throw Error(ErrorCode::InvalidArgument, "bad interval or grid");
    std::vector<Point> vals;
    for (double x : xs) vals.push_back(f.evaluate(Vec{x}));
    const PointBatch dist(*f.backend(), vals);
    std::vector<double> dx, dy;
    double cmax = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = i + 1; j < xs.size(); ++j) {
            if (xs[j] == xs[i]) continue;
            dx.push_back(std::abs(xs[j] - xs[i]));
            dy.push_back(dist(i, j));
            cmax = std::max(cmax, dy.back() / dx.back());
        }
    auto objective = [&](double c) {
        double m = 0.0;
        for (std::size_t k = 0; k < dx.size(); ++k) m = std::max(m, std::abs(dy[k] - c * dx[k]));
        return m;
    };
    double lo = 0.0, hi = std::max(cmax, f.lipschitz());
    while (hi - lo > 1e-10) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (objective(m1) <= objective(m2)) hi = m2;
        else lo = m1;
    }
    const double c = 0.5 * (lo + hi);
    return {objective(c) / (b - a), c};
}

inline Md1dResult md_exact_1d(const SampledMap& f, double a, double b, std::size_t grid) {
    if (grid < 2) throw Error(ErrorCode::InvalidArgument, "bad interval or grid");
    std::vector<double> xs;
    for (std::size_t i = 0; i < grid; ++i) xs.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(grid - 1));
    return md_exact_1d_points(f, a, b, xs);
}

}  // namespace metricdiff
