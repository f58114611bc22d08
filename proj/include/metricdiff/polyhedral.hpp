#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "metricdiff/core.hpp"

namespace metricdiff {

/// Seminorm of the form x -> max_k |<a_k, x>|.
///
/// Any seminorm on R^n is a limit of these, and an empty functional list is
/// the zero seminorm. Homogeneity, symmetry and subadditivity hold by
/// construction.
class PolyhedralSeminorm {
public:
    PolyhedralSeminorm() = default;
    PolyhedralSeminorm(std::size_t dim, std::vector<Vec> functionals)
        : dim_(dim), functionals_(std::move(functionals)) {
        for (const Vec& a : functionals_) {
            if (a.size() != dim_) throw Error(ErrorCode::InvalidArgument, "functional dimension mismatch");
        }
    }

    static PolyhedralSeminorm zero(std::size_t dim) { return PolyhedralSeminorm(dim, {}); }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return functionals_.size(); }
    const std::vector<Vec>& functionals() const { return functionals_; }

    double operator()(std::span<const double> x) const {
        double m = 0.0;
        for (const Vec& a : functionals_) m = std::max(m, std::abs(dot(a, x)));
        return m;
    }

    // Index of the functional achieving the max; lowest index on ties.
    std::size_t argmax(std::span<const double> x) const {
        std::size_t best = 0;
        double m = -1.0;
        for (std::size_t k = 0; k < functionals_.size(); ++k) {
            const double v = std::abs(dot(functionals_[k], x));
            if (v > m) {
                m = v;
                best = k;
            }
        }
        return best;
    }

    // Operator norm against the Euclidean norm: max_k |a_k|_2.
    double lipschitz_bound() const {
        double m = 0.0;
        for (const Vec& a : functionals_) m = std::max(m, norm2(a));
        return m;
    }

private:
    std::size_t dim_ = 0;
    std::vector<Vec> functionals_;
};

}  // namespace metricdiff
