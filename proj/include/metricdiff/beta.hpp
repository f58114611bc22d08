#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "metricdiff/core.hpp"
#include "metricdiff/corpus.hpp"
#include "metricdiff/dyadic.hpp"
#include "metricdiff/parallel.hpp"

namespace metricdiff {

struct Segment {
    Vec a, b;

    double diam() const { return dist2(a, b); }
};

struct QuadratureSpec {
    std::size_t m = 64;         // midpoint nodes per axis of the ordered-triple rule
    std::size_t mc_lines = 256; // sampled lines per cube for n >= 2
    std::uint64_t seed = 1;

    void validate() const {
        if (m < 8) throw Error(ErrorCode::InvalidArgument, "quadrature needs m >= 8");
        if (mc_lines < 64) throw Error(ErrorCode::InvalidArgument, "Monte Carlo needs at least 64 lines");
    }
};

// d(f(x),f(y)) + d(f(y),f(z)) - d(f(x),f(z))
inline double defect(const SampledMap& f, std::span<const double> x, std::span<const double> y,
                     std::span<const double> z) {
    const Point fx = f.evaluate(x), fy = f.evaluate(y), fz = f.evaluate(z);
    return f.distance(fx, fy) + f.distance(fy, fz) - f.distance(fx, fz);
}

/// Ordered-triple integral of the defect over a segment, normalized:
/// returns beta^2 = diam^-4 * integral over a <= x <= y <= z <= b of the
/// defect, by the composite midpoint rule with m nodes along the segment.
/// The raw value may be slightly negative from rounding.
inline double beta_segment_squared(const SampledMap& f, const Segment& s, std::size_t m) {
    const double diam = s.diam();
    if (!(diam > 0.0)) throw Error(ErrorCode::DegenerateSegment, "segment has zero length");
    if (m < 2) throw Error(ErrorCode::InvalidArgument, "need at least two nodes");
    std::vector<Point> vals;
    vals.reserve(m);
    const Vec dir = sub(s.b, s.a);
    for (std::size_t i = 0; i < m; ++i) {
        const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
        vals.push_back(f.evaluate(axpy(s.a, t, dir)));
    }
    // Sum over i<j<k of D_ij + D_jk - D_ik. A pair (i, j) appears as the
    // first leg m-1-j times, the second leg i times and the chord j-i-1
    // times, so its weight is m - 2(j - i).
    const PointBatch dist(*f.backend(), vals);
    double sum = 0.0, scale_sum = 0.0;
    const auto mi = static_cast<std::ptrdiff_t>(m);
    for (std::ptrdiff_t i = 0; i < mi; ++i) {
        for (std::ptrdiff_t j = i + 1; j < mi; ++j) {
            const double w = static_cast<double>(mi - 2 * (j - i));
            if (w == 0.0) continue;
            const double term = w * dist(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            sum += term;
            scale_sum += std::abs(term);
        }
    }
    // A sum within the rounding bound of its terms is indistinguishable from 0.
    if (std::abs(sum) <= 16.0 * static_cast<double>(m) * std::numeric_limits<double>::epsilon() * scale_sum) sum = 0.0;
    const double h = 1.0 / static_cast<double>(m);  // in units of diam
    return sum * h * h * h / diam;
}

inline double beta_segment(const SampledMap& f, const Segment& s, const QuadratureSpec& q) {
    q.validate();
    return std::sqrt(std::max(0.0, beta_segment_squared(f, s, q.m)));
}

struct BetaEstimate {
    double beta = 0.0;       // sqrt(max(0, beta_sq))
    double beta_sq = 0.0;    // raw estimate of beta^2
    double stderr_sq = 0.0;  // standard error of beta_sq (0 for n = 1)
    std::size_t lines = 0;
    std::size_t lines_hit = 0;
};

namespace detail {

// Orthonormal basis of the complement of unit vector u.
inline std::vector<Vec> complement_basis(const Vec& u) {
    const std::size_t n = u.size();
    std::vector<Vec> basis;
    for (std::size_t e = 0; e < n && basis.size() + 1 < n; ++e) {
        Vec v(n, 0.0);
        v[e] = 1.0;
        v = axpy(v, -dot(v, u), u);
        for (const Vec& b : basis) v = axpy(v, -dot(v, b), b);
        const double len = norm2(v);
        if (len > 1e-8) basis.push_back(scale(v, 1.0 / len));
    }
    return basis;
}

// Parameter interval of {p + t u} inside the box; empty if lo >= hi.
inline std::pair<double, double> clip_line(const Box& b, const Vec& p, const Vec& u) {
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

inline double unit_ball_volume(std::size_t k) {
    return std::pow(std::numbers::pi, 0.5 * static_cast<double>(k)) / std::tgamma(0.5 * static_cast<double>(k) + 1.0);
}

}  // namespace detail

/// beta^(n) of a cube-shaped box B: lines meeting 7B, weighted by the
/// probability Haar measure on directions and Lebesgue measure on offsets.
/// For n = 1 this is the segment beta of the 7B interval.
inline BetaEstimate beta_box(const SampledMap& f, const Box& b, const QuadratureSpec& q, std::uint64_t stream) {
    q.validate();
    const std::size_t n = b.dim();
    const Box seven = b.dilate(7.0);
    f.require_covers(seven, "7Q");
    BetaEstimate est;
    if (n == 1) {
        est.beta_sq = beta_segment_squared(f, Segment{Vec{seven.lower(0)}, Vec{seven.upper(0)}}, q.m);
        est.beta = std::sqrt(std::max(0.0, est.beta_sq));
        est.lines = est.lines_hit = 1;
        return est;
    }
    // Offsets live in the (n-1)-ball of radius R around the center, which
    // contains the projection of 7B; lines outside it miss 7B.
    const double radius = seven.half_side * std::sqrt(static_cast<double>(n));
    const double slab = detail::unit_ball_volume(n - 1) * std::pow(radius, static_cast<double>(n - 1));
    const double side = b.side();
    Rng rng(stream);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < q.mc_lines; ++k) {
        Vec u = rng.unit_vector(n);
        // Hemisphere: u and -u give the same line.
        for (std::size_t i = 0; i < n; ++i) {
            if (u[i] != 0.0) {
                if (u[i] < 0.0) u = scale(u, -1.0);
                break;
            }
        }
        const auto basis = detail::complement_basis(u);
        Vec w = rng.unit_vector(n - 1);
        const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(n - 1));
        Vec p = seven.center;
        for (std::size_t j = 0; j < basis.size(); ++j) p = axpy(p, r * w[j], basis[j]);
        const auto [t0, t1] = detail::clip_line(seven, p, u);
        double value = 0.0;
        if (t1 - t0 >= side) {
            value = beta_segment_squared(f, Segment{axpy(p, t0, u), axpy(p, t1, u)}, q.m);
            ++est.lines_hit;
        }
        // Welford
        const double delta = value - mean;
        mean += delta / static_cast<double>(k + 1);
        m2 += delta * (value - mean);
    }
    est.lines = q.mc_lines;
    if (est.lines_hit == 0) throw Error(ErrorCode::InsufficientCoverage, "no sampled line met 7Q in a long enough chord");
    const double norm = slab / std::pow(side, static_cast<double>(n - 1));
    const double var = q.mc_lines > 1 ? m2 / static_cast<double>(q.mc_lines - 1) : 0.0;
    est.beta_sq = norm * mean;
    est.stderr_sq = norm * std::sqrt(var / static_cast<double>(q.mc_lines));
    est.beta = std::sqrt(std::max(0.0, est.beta_sq));
    return est;
}

inline std::uint64_t cube_stream(std::uint64_t seed, const std::string& id) {
    return mix_seed(seed, fnv1a(id));
}

inline BetaEstimate beta_cube(const SampledMap& f, const DyadicCube& q, const QuadratureSpec& spec) {
    return beta_box(f, q.box(), spec, cube_stream(spec.seed, q.id()));
}

struct LevelSum {
    int level = 0;
    double sum = 0.0;
};

struct BetaCarlesonReport {
    double total = 0.0;
    std::vector<LevelSum> per_level;
    double lipschitz = 0.0;
    double ratio = 0.0;  // total / L_hat
    std::size_t clamped_count = 0;
    std::uint64_t seed = 0;
    int depth = 0;
    int ancestor_depth = 0;
};

/// sum over Q in Delta(R) down to `depth` of beta(3 Q^N)^2 vol(Q), with Q^N
/// clamped to R. beta depends only on Q^N, so each ancestor is estimated once.
inline BetaCarlesonReport carleson_beta_sum(const SampledMap& f, const DyadicCube& r, int depth, int ancestor_depth,
                                            const QuadratureSpec& q, std::size_t workers = 1) {
    q.validate();
    const auto cubes = enumerate_cubes(r, depth);
    std::map<std::string, std::size_t> slot;
    std::vector<DyadicCube> ancestors;
    std::vector<std::size_t> cube_slot(cubes.size());
    BetaCarlesonReport rep;
    for (std::size_t i = 0; i < cubes.size(); ++i) {
        // Clamp relative to R, not to the grid's level 0.
        const int room = cubes[i].level() - r.level();
        const int up = std::min(ancestor_depth, room);
        if (up < ancestor_depth) ++rep.clamped_count;
        const DyadicCube a = ancestor(cubes[i], up);
        auto [it, inserted] = slot.emplace(a.id(), ancestors.size());
        if (inserted) ancestors.push_back(a);
        cube_slot[i] = it->second;
    }
    std::vector<double> beta_sq(ancestors.size());
    parallel_for(ancestors.size(), workers, [&](std::size_t k) {
        const BetaEstimate e = beta_box(f, ancestors[k].dilate(3.0), q, cube_stream(q.seed, ancestors[k].id()));
        beta_sq[k] = std::max(0.0, e.beta_sq);
    });
    rep.per_level.resize(static_cast<std::size_t>(depth) + 1);
    for (int j = 0; j <= depth; ++j) rep.per_level[static_cast<std::size_t>(j)].level = r.level() + j;
    for (std::size_t i = 0; i < cubes.size(); ++i) {
        const double c = beta_sq[cube_slot[i]] * cubes[i].volume();
        rep.per_level[static_cast<std::size_t>(cubes[i].level() - r.level())].sum += c;
    }
    for (const auto& l : rep.per_level) rep.total += l.sum;
    rep.lipschitz = f.lipschitz();
    rep.ratio = rep.lipschitz > 0.0 ? rep.total / rep.lipschitz : 0.0;
    rep.seed = q.seed;
    rep.depth = depth;
    rep.ancestor_depth = ancestor_depth;
    return rep;
}

}  // namespace metricdiff
