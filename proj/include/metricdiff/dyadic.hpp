#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "metricdiff/core.hpp"

namespace metricdiff {

// Axis-parallel cube given by center and half side. Used for dilations like
// 3Q and 7Q, which are generally not dyadic.
struct Box {
    Vec center;
    double half_side = 0.0;

    std::size_t dim() const { return center.size(); }
    double side() const { return 2.0 * half_side; }
    double volume() const { return std::pow(side(), static_cast<double>(dim())); }
    double lower(std::size_t i) const { return center[i] - half_side; }
    double upper(std::size_t i) const { return center[i] + half_side; }

    Box dilate(double factor) const { return Box{center, half_side * factor}; }

    bool contains(const Vec& x, double tol = 0.0) const {
        for (std::size_t i = 0; i < dim(); ++i) {
            if (x[i] < lower(i) - tol || x[i] > upper(i) + tol) return false;
        }
        return true;
    }

    bool contains(const Box& other, double tol = 0.0) const {
        for (std::size_t i = 0; i < dim(); ++i) {
            if (other.lower(i) < lower(i) - tol || other.upper(i) > upper(i) + tol) return false;
        }
        return true;
    }
};

// Offset of a translated dyadic grid, in units of the root side. Entries are
// in {0, +1/3, -1/3}.
struct GridShift {
    Vec offset;

    bool is_zero() const {
        return std::all_of(offset.begin(), offset.end(), [](double v) { return v == 0.0; });
    }

    friend bool operator==(const GridShift&, const GridShift&) = default;
};

inline std::vector<GridShift> all_grid_shifts(std::size_t n) {
    static constexpr double choices[] = {0.0, 1.0 / 3.0, -1.0 / 3.0};
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;
    std::vector<GridShift> shifts;
    shifts.reserve(total);
    for (std::size_t code = 0; code < total; ++code) {
        GridShift s{Vec(n)};
        std::size_t c = code;
        for (std::size_t i = 0; i < n; ++i) {
            s.offset[i] = choices[c % 3];
            c /= 3;
        }
        shifts.push_back(std::move(s));
    }
    return shifts;
}

// A dyadic grid: the root cube [origin, origin + side)^n translated by
// shift * side. Level-j cubes have side 2^-j * side.
struct Grid {
    Vec origin;
    double side = 1.0;
    GridShift shift;

    std::size_t dim() const { return origin.size(); }

    double offset(std::size_t i) const {
        return origin[i] + (shift.offset.empty() ? 0.0 : shift.offset[i] * side);
    }

    static Grid unit(std::size_t n) { return Grid{Vec(n, 0.0), 1.0, GridShift{Vec(n, 0.0)}}; }

    Grid shifted(const GridShift& s) const { return Grid{origin, side, s}; }

    friend bool operator==(const Grid&, const Grid&) = default;
};

class DyadicCube {
public:
    DyadicCube() = default;
    DyadicCube(Grid grid, int level, std::vector<std::int64_t> coords)
        : grid_(std::move(grid)), level_(level), coords_(std::move(coords)) {
        if (coords_.size() != grid_.dim()) {
            throw Error(ErrorCode::InvalidArgument, "cube coordinates do not match grid dimension");
        }
    }

    static DyadicCube root(Grid grid) {
        const std::size_t n = grid.dim();
        return DyadicCube(std::move(grid), 0, std::vector<std::int64_t>(n, 0));
    }

    const Grid& grid() const { return grid_; }
    int level() const { return level_; }
    const std::vector<std::int64_t>& coords() const { return coords_; }
    std::size_t dim() const { return coords_.size(); }

    double side() const { return std::ldexp(grid_.side, -level_); }

    double volume() const { return std::pow(side(), static_cast<double>(dim())); }

    double lower(std::size_t i) const {
        return grid_.offset(i) + static_cast<double>(coords_[i]) * side();
    }

    Vec center() const {
        Vec c(dim());
        for (std::size_t i = 0; i < dim(); ++i) c[i] = lower(i) + 0.5 * side();
        return c;
    }

    Box box() const { return Box{center(), 0.5 * side()}; }

    // lambda * Q
    Box dilate(double factor) const { return box().dilate(factor); }

    std::vector<DyadicCube> children() const {
        const std::size_t n = dim();
        std::vector<DyadicCube> out;
        out.reserve(std::size_t{1} << n);
        for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
            std::vector<std::int64_t> c(n);
            // Lexicographic order: the first coordinate varies slowest.
            for (std::size_t i = 0; i < n; ++i) {
                c[i] = 2 * coords_[i] + static_cast<std::int64_t>((mask >> (n - 1 - i)) & 1U);
            }
            out.emplace_back(grid_, level_ + 1, std::move(c));
        }
        return out;
    }

    // Exact containment for cubes of the same grid.
    bool contains(const DyadicCube& other) const {
        if (!(grid_ == other.grid_) || other.level_ < level_) return false;
        const int d = other.level_ - level_;
        for (std::size_t i = 0; i < dim(); ++i) {
            if (floor_shift(other.coords_[i], d) != coords_[i]) return false;
        }
        return true;
    }

    std::string id() const {
        std::ostringstream os;
        os << 'L' << level_ << ':';
        for (std::size_t i = 0; i < coords_.size(); ++i) {
            if (i) os << ',';
            os << coords_[i];
        }
        return os.str();
    }

    friend bool operator==(const DyadicCube&, const DyadicCube&) = default;

    static std::int64_t floor_shift(std::int64_t v, int bits) {
        // Arithmetic shift rounds toward -inf for negative values.
        return v >> bits;
    }

private:
    Grid grid_;
    int level_ = 0;
    std::vector<std::int64_t> coords_;
};

// Q^N: the dyadic cube of side 2^N side(Q) containing Q.
inline DyadicCube ancestor(const DyadicCube& q, int generations) {
    if (generations < 0) throw Error(ErrorCode::InvalidArgument, "negative ancestor depth");
    if (q.level() < generations) {
        throw Error(ErrorCode::AboveRoot, "cube " + q.id() + " has no ancestor " +
                                              std::to_string(generations) + " levels up");
    }
    std::vector<std::int64_t> c(q.dim());
    for (std::size_t i = 0; i < q.dim(); ++i) {
        c[i] = DyadicCube::floor_shift(q.coords()[i], generations);
    }
    return DyadicCube(q.grid(), q.level() - generations, std::move(c));
}

struct ClampedAncestor {
    DyadicCube cube;
    bool clamped = false;
};

// Like ancestor(), but stops at the grid's level-0 cube instead of failing.
inline ClampedAncestor ancestor_clamped(const DyadicCube& q, int generations) {
    if (q.level() >= generations) return {ancestor(q, generations), false};
    return {ancestor(q, q.level()), true};
}

// All cubes of Delta(R) down to `depth` levels below R, level-major and
// lexicographic within a level.
inline std::vector<DyadicCube> enumerate_cubes(const DyadicCube& r, int depth) {
    if (depth < 0) throw Error(ErrorCode::InvalidArgument, "negative depth");
    const std::size_t n = r.dim();
    std::vector<DyadicCube> out;
    for (int j = 0; j <= depth; ++j) {
        const std::int64_t per_axis = std::int64_t{1} << j;
        const std::uint64_t count = std::uint64_t{1} << (static_cast<std::uint64_t>(j) * n);
        for (std::uint64_t idx = 0; idx < count; ++idx) {
            // last coordinate varies fastest
            std::vector<std::int64_t> c(n);
            std::uint64_t rest = idx;
            for (std::size_t i = n; i-- > 0;) {
                c[i] = r.coords()[i] * per_axis + static_cast<std::int64_t>(rest % static_cast<std::uint64_t>(per_axis));
                rest /= static_cast<std::uint64_t>(per_axis);
            }
            out.emplace_back(r.grid(), r.level() + j, std::move(c));
        }
    }
    return out;
}

// Number of cubes enumerate_cubes(R, depth) returns.
inline std::size_t cube_count(std::size_t n, int depth) {
    std::size_t total = 0;
    for (int j = 0; j <= depth; ++j) total += std::size_t{1} << (static_cast<std::size_t>(j) * n);
    return total;
}

struct ShiftedLocation {
    GridShift shift;
    DyadicCube cube;  // lives in the shifted grid, i.e. it is R + v
    double side_ratio = 0.0;  // side(R) / side(Q), the achieved comparability constant
};

// 1/3-trick: find v in {0, +-1/3}^n and a cube R with 3Q inside R + v and
// side(R) comparable to side(Q). `root` supplies the unshifted grid.
inline ShiftedLocation shifted_grid_locate(const Box& q, const Grid& root) {
    const std::size_t n = root.dim();
    if (q.dim() != n) throw Error(ErrorCode::InvalidArgument, "dimension mismatch");
    if (q.side() > root.side / 6.0 * (1.0 + 1e-12)) {
        throw Error(ErrorCode::TooLarge, "side(Q) exceeds 1/6 of the root side");
    }
    static constexpr double order[] = {0.0, 1.0 / 3.0, -1.0 / 3.0};
    const Box tq = q.dilate(3.0);
    const double tol = 1e-12 * root.side;
    // Finest level whose cubes are at least as long as 3Q.
    int level = static_cast<int>(std::floor(std::log2(root.side / tq.side())));
    for (; level >= 0; --level) {
        const double side = std::ldexp(root.side, -level);
        GridShift shift{Vec(n)};
        std::vector<std::int64_t> coords(n);
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) {
            bool found = false;
            for (double v : order) {
                const double base = root.origin[i] + v * root.side;
                const auto k = static_cast<std::int64_t>(std::floor((tq.lower(i) - base) / side + 1e-12));
                const double lo = base + static_cast<double>(k) * side;
                if (tq.lower(i) >= lo - tol && tq.upper(i) <= lo + side + tol) {
                    shift.offset[i] = v;
                    coords[i] = k;
                    found = true;
                    break;
                }
            }
            ok = found;
        }
        if (ok) {
            DyadicCube r(root.shifted(shift), level, std::move(coords));
            const double ratio = r.side() / q.side();
            return {std::move(shift), std::move(r), ratio};
        }
    }
    throw Error(ErrorCode::TooLarge, "no shifted dyadic cube contains 3Q");
}

inline ShiftedLocation shifted_grid_locate(const DyadicCube& q) {
    const Grid base = q.grid().shifted(GridShift{Vec(q.dim(), 0.0)});
    return shifted_grid_locate(q.box(), base);
}

}  // namespace metricdiff
