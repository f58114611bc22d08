#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "metricdiff/core.hpp"

namespace metricdiff::hull {

// Orthonormal basis of span(vs), by modified Gram-Schmidt with a relative
// rank tolerance.
inline std::vector<Vec> orthonormal_span(const std::vector<Vec>& vs, double tol = 1e-9) {
    std::vector<Vec> basis;
    for (const Vec& v0 : vs) {
        Vec v = v0;
        const double len0 = norm2(v);
        if (len0 == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass)
            for (const Vec& b : basis) v = axpy(v, -dot(v, b), b);
        const double len = norm2(v);
        if (len > tol * len0) basis.push_back(scale(v, 1.0 / len));
    }
    return basis;
}

// Orthonormal basis of the orthogonal complement of span(basis) in R^n.
inline std::vector<Vec> complement(const std::vector<Vec>& basis, std::size_t n) {
    std::vector<Vec> all = basis;
    std::vector<Vec> out;
    for (std::size_t e = 0; e < n; ++e) {
        Vec v(n, 0.0);
        v[e] = 1.0;
        for (int pass = 0; pass < 2; ++pass)
            for (const Vec& b : all) v = axpy(v, -dot(v, b), b);
        const double len = norm2(v);
        if (len > 1e-6) {
            v = scale(v, 1.0 / len);
            all.push_back(v);
            out.push_back(v);
        }
    }
    return out;
}

namespace detail {

inline double cross2(const Vec& o, const Vec& a, const Vec& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

inline void push_unique(std::vector<Vec>& out, Vec a, double tol) {
    for (const Vec& b : out) {
        const double scale_ = std::max(norm2(a), norm2(b));
        if (dist2(a, b) <= tol * scale_) return;
        if (dist2(a, scale(b, -1.0)) <= tol * scale_) return;
    }
    out.push_back(std::move(a));
}

}  // namespace detail

/// Facet functionals of the symmetric polygon co{+-p_i} in R^2: vectors a
/// with <a, y> = 1 on an edge and <a, p_i> <= 1 for all i. One functional
/// per antipodal facet pair.
inline std::vector<Vec> symmetric_facets_2d(const std::vector<Vec>& pts, double tol = 1e-10) {
    std::vector<Vec> all;
    all.reserve(2 * pts.size());
    for (const Vec& p : pts) {
        all.push_back(p);
        all.push_back(scale(p, -1.0));
    }
    std::sort(all.begin(), all.end(), [](const Vec& a, const Vec& b) { return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]); });
    // Andrew's monotone chain, counterclockwise, collinear points dropped.
    std::vector<Vec> h(2 * all.size());
    std::size_t k = 0;
    double scale_ = 0.0;
    for (const Vec& p : all) scale_ = std::max(scale_, norm2(p));
    const double eps = tol * scale_ * scale_;
    for (const Vec& p : all) {
        while (k >= 2 && detail::cross2(h[k - 2], h[k - 1], p) <= eps) --k;
        h[k++] = p;
    }
    for (std::size_t i = all.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && detail::cross2(h[k - 2], h[k - 1], all[i]) <= eps) --k;
        h[k++] = all[i];
    }
    h.resize(k > 0 ? k - 1 : 0);
    std::vector<Vec> facets;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const Vec& p = h[i];
        const Vec& q = h[(i + 1) % h.size()];
        // Solve <a,p> = <a,q> = 1.
        const double det = p[0] * q[1] - p[1] * q[0];
        if (std::abs(det) <= eps) continue;
        Vec a{(q[1] - p[1]) / det, (p[0] - q[0]) / det};
        detail::push_unique(facets, std::move(a), 1e-9);
    }
    return facets;
}

/// Facet functionals of co{+-p_i} in R^3 by exhaustive plane enumeration over
/// point triples. Quartic in the point count; meant for the few dozen hull
/// points a star profile produces.
inline std::vector<Vec> symmetric_facets_3d(const std::vector<Vec>& pts, double tol = 1e-9) {
    std::vector<Vec> all;
    for (const Vec& p : pts) {
        detail::push_unique(all, p, 1e-12);
    }
    const std::size_t base = all.size();
    for (std::size_t i = 0; i < base; ++i) all.push_back(scale(all[i], -1.0));
    double scale_ = 0.0;
    for (const Vec& p : all) scale_ = std::max(scale_, norm2(p));
    std::vector<Vec> facets;
    const std::size_t m = all.size();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            for (std::size_t l = j + 1; l < m; ++l) {
                const Vec u = sub(all[j], all[i]);
                const Vec v = sub(all[l], all[i]);
                Vec nrm{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
                const double len = norm2(nrm);
                if (len <= tol * scale_ * scale_) continue;
                nrm = scale(nrm, 1.0 / len);
                double d = dot(nrm, all[i]);
                if (std::abs(d) <= tol * scale_) continue;
                if (d < 0) {
                    nrm = scale(nrm, -1.0);
                    d = -d;
                }
                bool supporting = true;
                for (const Vec& p : all) {
                    if (dot(nrm, p) > d + tol * scale_) {
                        supporting = false;
                        break;
                    }
                }
                if (supporting) detail::push_unique(facets, scale(nrm, 1.0 / d), 1e-7);
            }
    return facets;
}

}  // namespace metricdiff::hull
