#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metricdiff/beta.hpp"
#include "metricdiff/corpus.hpp"
#include "metricdiff/dyadic.hpp"
#include "metricdiff/parallel.hpp"
#include "metricdiff/seminorm.hpp"

namespace metricdiff {

struct PackingLevel {
    int level = 0;
    std::size_t bad_count = 0;
    double bad_volume = 0.0;
};

struct PackingReport {
    double delta = 0.0;
    double total_bad_volume = 0.0;
    double ratio = 0.0;  // total / vol(R)
    std::vector<PackingLevel> per_level;
    double lipschitz = 0.0;
    std::optional<double> lipschitz_spec;
    GridShift shift;
    int depth = 0;
    AnalysisParams params;
};

// md(3Q) for every Q in Delta(R) down to `depth`, in enumeration order.
inline std::vector<double> md_dilated_values(const SampledMap& f, const std::vector<DyadicCube>& cubes,
                                             const AnalysisParams& p, std::size_t workers) {
    std::vector<double> md(cubes.size());
    parallel_for(cubes.size(), workers, [&](std::size_t i) {
        AnalysisParams local = p;
        local.seed = cube_stream(p.seed, cubes[i].id());
        md[i] = md_estimate(f, cubes[i], 3.0, local).value;
    });
    return md;
}

inline PackingReport packing_from_values(const DyadicCube& r, int depth, const std::vector<DyadicCube>& cubes,
                                         const std::vector<double>& md, double delta, double lipschitz,
                                         const AnalysisParams& p) {
    PackingReport rep;
    rep.delta = delta;
    rep.depth = depth;
    rep.params = p;
    rep.lipschitz = lipschitz;
    rep.shift = r.grid().shift;
    rep.per_level.resize(static_cast<std::size_t>(depth) + 1);
    for (int j = 0; j <= depth; ++j) rep.per_level[static_cast<std::size_t>(j)].level = r.level() + j;
    for (std::size_t i = 0; i < cubes.size(); ++i) {
        if (!(md[i] > delta * lipschitz)) continue;
        auto& l = rep.per_level[static_cast<std::size_t>(cubes[i].level() - r.level())];
        ++l.bad_count;
        l.bad_volume += cubes[i].volume();
    }
    for (const auto& l : rep.per_level) rep.total_bad_volume += l.bad_volume;
    rep.ratio = rep.total_bad_volume / r.volume();
    return rep;
}

/// Packing sums sum{vol(Q) : Q in Delta(R), md(3Q) > delta L_hat} / vol(R),
/// one report per delta. md(3Q) is computed once per cube and shared by all
/// thresholds, so the ratios are exactly nonincreasing in delta.
inline std::vector<PackingReport> md_packing_sums(const SampledMap& f, const DyadicCube& r,
                                                  const std::vector<double>& deltas, int depth,
                                                  const AnalysisParams& p, std::size_t workers = 1) {
    if (depth < 0) throw Error(ErrorCode::InvalidArgument, "depth must be nonnegative");
    for (double d : deltas)
        if (!(d > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be positive");
    p.validate();
    const auto cubes = enumerate_cubes(r, depth);
    const auto md = md_dilated_values(f, cubes, p, workers);
    std::vector<PackingReport> out;
    for (double d : deltas) {
        out.push_back(packing_from_values(r, depth, cubes, md, d, f.lipschitz(), p));
        out.back().lipschitz_spec = f.lipschitz_spec();
    }
    return out;
}

inline PackingReport md_packing_sum(const SampledMap& f, const DyadicCube& r, double delta, int depth,
                                    const AnalysisParams& p, std::size_t workers = 1) {
    return md_packing_sums(f, r, {delta}, depth, p, workers).front();
}

/// The same root translated by each of the 3^n offsets in {0, +-1/3}^n
/// (units of the root side).
inline std::vector<DyadicCube> shifted_roots(const DyadicCube& r) {
    std::vector<DyadicCube> out;
    for (const GridShift& s : all_grid_shifts(r.dim())) out.emplace_back(r.grid().shifted(s), r.level(), r.coords());
    return out;
}

struct ScanRow {
    int level = 0;
    double side = 0.0;
    double md = 0.0;
    std::string cube;
};

/// md(3Q) for the cube Q containing z at each level 0..max_level below the
/// root.
inline std::vector<ScanRow> kirchheim_scan(const SampledMap& f, const Vec& z, int max_level, const AnalysisParams& p,
                                           std::size_t workers = 1) {
    const DyadicCube& root = f.root();
    if (z.size() != root.dim()) throw Error(ErrorCode::InvalidArgument, "point dimension mismatch");
    if (!root.box().contains(z)) throw Error(ErrorCode::OutOfDomain, "scan point outside the root cube");
    if (max_level < 0) throw Error(ErrorCode::InvalidArgument, "max level must be nonnegative");
    p.validate();
    std::vector<DyadicCube> chain{root};
    for (int j = 1; j <= max_level; ++j) {
        const DyadicCube& q = chain.back();
        std::vector<std::int64_t> c(root.dim());
        for (std::size_t i = 0; i < root.dim(); ++i) {
            const double t = (z[i] - q.lower(i)) / (0.5 * q.side());
            // Half-open cubes; the top face of the root stays in the last child.
            const std::int64_t bit = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(t)), 0, 1);
            c[i] = 2 * q.coords()[i] + bit;
        }
        chain.emplace_back(root.grid(), q.level() + 1, std::move(c));
    }
    const auto md = md_dilated_values(f, chain, p, workers);
    std::vector<ScanRow> rows;
    for (std::size_t j = 0; j < chain.size(); ++j) rows.push_back({chain[j].level(), chain[j].side(), md[j], chain[j].id()});
    return rows;
}

struct BetaMdRow {
    std::string cube;
    int level = 0;
    double beta_lift = 0.0;  // beta of the lifted map on 3 Q^N
    double md = 0.0;         // md(Q)
};

/// One row per Q in Delta(R): beta of the lifted map on 3Q^N (Q^N clamped to
/// R) against md(Q), sorted by beta (enumeration order among ties).
inline std::vector<BetaMdRow> beta_vs_md_table(const SampledMap& f, const DyadicCube& r, int depth,
                                               const AnalysisParams& p, const QuadratureSpec& q,
                                               std::size_t workers = 1) {
    p.validate();
    q.validate();
    const SampledMap lifted = f.is_lifted() ? f : lift_map(f);
    const auto cubes = enumerate_cubes(r, depth);
    std::map<std::string, std::size_t> slot;
    std::vector<DyadicCube> ancestors;
    std::vector<std::size_t> cube_slot(cubes.size());
    for (std::size_t i = 0; i < cubes.size(); ++i) {
        const int up = std::min(p.ancestor_depth, cubes[i].level() - r.level());
        const DyadicCube a = ancestor(cubes[i], up);
        auto [it, inserted] = slot.emplace(a.id(), ancestors.size());
        if (inserted) ancestors.push_back(a);
        cube_slot[i] = it->second;
    }
    std::vector<double> beta(ancestors.size());
    parallel_for(ancestors.size(), workers, [&](std::size_t k) {
        beta[k] = beta_box(lifted, ancestors[k].dilate(3.0), q, cube_stream(q.seed, ancestors[k].id())).beta;
    });
    std::vector<double> md(cubes.size());
    parallel_for(cubes.size(), workers, [&](std::size_t i) {
        AnalysisParams local = p;
        local.seed = cube_stream(p.seed, cubes[i].id());
        md[i] = md_estimate(f, cubes[i], 1.0, local).value;
    });
    std::vector<BetaMdRow> rows;
    rows.reserve(cubes.size());
    for (std::size_t i = 0; i < cubes.size(); ++i)
        rows.push_back({cubes[i].id(), cubes[i].level(), beta[cube_slot[i]], md[i]});
    std::stable_sort(rows.begin(), rows.end(), [](const BetaMdRow& a, const BetaMdRow& b) { return a.beta_lift < b.beta_lift; });
    return rows;
}

}  // namespace metricdiff
