#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "metricdiff/core.hpp"

namespace metricdiff::lp {

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

struct Result {
    Status status = Status::Infeasible;
    Vec x;           // primal solution
    Vec duals;       // multipliers of the equality rows
    double objective = 0.0;
    std::vector<std::size_t> basis;  // basic column per row (artificials have index >= cols)
};

/// Dense two-phase primal simplex for
///     minimize c.x  subject to  A x = b,  x >= 0.
/// `a` is row-major with `rows` rows. Dantzig pricing, switching to Bland's
/// rule after a run of degenerate pivots. Meant for the small programs that
/// show up here (a handful of rows, up to a few thousand columns).
class Simplex {
public:
    Simplex(std::size_t rows, std::size_t cols, const std::vector<double>& a, const Vec& b, const Vec& c,
            double tol = 1e-10)
        : m_(rows), n_(cols), tol_(tol), width_(cols + rows + 1), t_(rows * width_, 0.0), basis_(rows), sign_(rows, 1.0),
          c_(c) {
        for (std::size_t i = 0; i < m_; ++i) {
            sign_[i] = b[i] < 0.0 ? -1.0 : 1.0;
            for (std::size_t j = 0; j < n_; ++j) at(i, j) = sign_[i] * a[i * n_ + j];
            at(i, n_ + i) = 1.0;
            rhs(i) = sign_[i] * b[i];
            basis_[i] = n_ + i;
        }
    }

    Result solve(std::size_t max_iter = 100000) {
        Result r;
        // Phase 1: minimize the sum of artificials.
        Vec cost1(n_ + m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) cost1[n_ + i] = 1.0;
        Status s = run(cost1, n_ + m_, max_iter);
        if (s == Status::IterationLimit) {
            r.status = s;
            return r;
        }
        double infeas = 0.0;
        double scale = 1.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] >= n_) infeas += rhs(i);
            scale = std::max(scale, std::abs(rhs(i)));
        }
        if (infeas > 1e-8 * scale) {
            r.status = Status::Infeasible;
            return r;
        }
        // Drive zero-level artificials out of the basis where possible.
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < n_) continue;
            std::size_t best = n_;
            double big = tol_;
            for (std::size_t j = 0; j < n_; ++j) {
                if (std::abs(at(i, j)) > big) {
                    big = std::abs(at(i, j));
                    best = j;
                }
            }
            if (best < n_) pivot(i, best);
        }
        // Phase 2 over the original columns only.
        Vec cost2(n_ + m_, 0.0);
        std::copy(c_.begin(), c_.end(), cost2.begin());
        s = run(cost2, n_, max_iter);
        r.status = s;
        if (s != Status::Optimal) return r;

        r.x.assign(n_, 0.0);
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] < n_) r.x[basis_[i]] = rhs(i);
        r.objective = 0.0;
        for (std::size_t j = 0; j < n_; ++j) r.objective += c_[j] * r.x[j];
        // y = c_B B^{-1}; the artificial block of the tableau holds B^{-1}.
        r.duals.assign(m_, 0.0);
        for (std::size_t k = 0; k < m_; ++k) {
            double y = 0.0;
            for (std::size_t i = 0; i < m_; ++i) y += cost2[basis_[i]] * at(i, n_ + k);
            r.duals[k] = y * sign_[k];
        }
        r.basis = basis_;
        return r;
    }

private:
    double& at(std::size_t i, std::size_t j) { return t_[i * width_ + j]; }
    double& rhs(std::size_t i) { return t_[i * width_ + width_ - 1]; }

    void pivot(std::size_t row, std::size_t col) {
        const double p = at(row, col);
        double* pr = &t_[row * width_];
        for (std::size_t j = 0; j < width_; ++j) pr[j] /= p;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == row) continue;
            double* ri = &t_[i * width_];
            const double f = ri[col];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < width_; ++j) ri[j] -= f * pr[j];
        }
        basis_[row] = col;
    }

    // Optimize `cost` letting only columns < `enterable` enter the basis.
    Status run(const Vec& cost, std::size_t enterable, std::size_t max_iter) {
        Vec reduced(n_ + m_);
        std::size_t degenerate_run = 0;
        for (std::size_t iter = 0; iter < max_iter; ++iter) {
            const bool bland = degenerate_run > 50;
            // reduced_j = cost_j - sum_i cost_{B_i} T_ij
            for (std::size_t j = 0; j < n_ + m_; ++j) reduced[j] = cost[j];
            for (std::size_t i = 0; i < m_; ++i) {
                const double cb = cost[basis_[i]];
                if (cb == 0.0) continue;
                const double* ri = &t_[i * width_];
                for (std::size_t j = 0; j < n_ + m_; ++j) reduced[j] -= cb * ri[j];
            }
            std::size_t enter = enterable;
            double most = -tol_;
            for (std::size_t j = 0; j < enterable; ++j) {
                if (reduced[j] < most) {
                    enter = j;
                    if (bland) break;
                    most = reduced[j];
                }
            }
            if (enter == enterable) return Status::Optimal;

            std::size_t leave = m_;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m_; ++i) {
                const double a = at(i, enter);
                if (a > tol_) {
                    const double ratio = rhs(i) / a;
                    if (ratio < best - 1e-14 || (ratio <= best + 1e-14 && leave < m_ && basis_[i] < basis_[leave])) {
                        best = ratio;
                        leave = i;
                    }
                }
            }
            if (leave == m_) return Status::Unbounded;
            degenerate_run = best <= tol_ ? degenerate_run + 1 : 0;
            pivot(leave, enter);
        }
        return Status::IterationLimit;
    }

    std::size_t m_, n_;
    double tol_;
    std::size_t width_;
    std::vector<double> t_;
    std::vector<std::size_t> basis_;
    Vec sign_;
    Vec c_;
};

inline Result solve(std::size_t rows, std::size_t cols, const std::vector<double>& a, const Vec& b, const Vec& c) {
    return Simplex(rows, cols, a, b, c).solve();
}

}  // namespace metricdiff::lp
