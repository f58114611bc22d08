#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace metricdiff;

namespace {

const DyadicCube& root1() {
    static const DyadicCube r = oracle::root1(-1.0, 2.0);
    return r;
}

const DyadicCube& root2() {
    static const DyadicCube r = oracle::root_n(2, -1.0, 2.0);
    return r;
}

SampledMap sample1(const MapSpec& spec) { return sample_map(spec, root1(), std::ldexp(1.0, -8), required_margin(2)); }

SampledMap sample2(const MapSpec& spec) { return sample_map(spec, root2(), std::ldexp(1.0, -4), required_margin(2)); }

PolyhedralSeminorm l1_2d() { return PolyhedralSeminorm(2, {Vec{1, 1}, Vec{1, -1}}); }

double l1(const Vec& x) { return std::abs(x[0]) + std::abs(x[1]); }

StarProfile random_profile(std::uint64_t seed, std::size_t count = 32) {
    Rng rng(seed);
    StarProfile s;
    s.directions = profile_directions(2, count);
    const std::size_t half = count / 2;
    s.radii.resize(count);
    for (std::size_t k = 0; k < half; ++k) s.radii[k] = s.radii[k + half] = rng.uniform(0.5, 2.0);
    return s;
}

// Cross-polytope profile in R^2: radius 1 on the axes, on the boundary along
// the diagonals.
StarProfile cross_profile() {
    StarProfile s;
    const double r = 1.0 / std::sqrt(2.0);
    s.directions = {Vec{1, 0}, Vec{0, 1}, Vec{r, r}, Vec{r, -r}, Vec{-1, 0}, Vec{0, -1}, Vec{-r, -r}, Vec{-r, r}};
    s.radii = {1, 1, r, r, 1, 1, r, r};
    return s;
}

DyadicCube cube2(int level, std::int64_t i, std::int64_t j) { return DyadicCube(root2().grid(), level, {i, j}); }

}  // namespace

TEST(Seminorm, PolyhedralAxioms) {
    Rng rng(1);
    const PolyhedralSeminorm s(3, {Vec{1, -2, 0.5}, Vec{0, 3, 1}, Vec{-1, 0.2, 0.7}});
    for (int t = 0; t < 10000; ++t) {
        Vec x(3), y(3);
        for (std::size_t i = 0; i < 3; ++i) {
            x[i] = rng.uniform(-5, 5);
            y[i] = rng.uniform(-5, 5);
        }
        const double lam = rng.uniform(-4, 4);
        EXPECT_NEAR(s(scale(x, lam)), std::abs(lam) * s(x), 1e-12 * std::max(1.0, std::abs(lam) * s(x)));
        EXPECT_LE(s(add(x, y)), s(x) + s(y) + 1e-12);
        EXPECT_EQ(s(scale(x, -1.0)), s(x));
    }
    EXPECT_EQ(PolyhedralSeminorm::zero(2)(Vec{3, 4}), 0.0);
}

TEST(Seminorm, AutoAlphaSatisfiesClosingEstimate) {
    for (std::size_t n : {1u, 2u, 3u}) {
        for (double delta : {0.1, 0.25, 0.5}) {
            const double a = auto_alpha(delta, n);
            EXPECT_GT(a, 0.0);
            EXPECT_LT(md_error_bound(a, n), delta);
            EXPECT_GE(md_error_bound(a * 1.001, n), delta * 0.999);
            const AnalysisParams p = AnalysisParams::for_dimension(n, delta);
            EXPECT_NO_THROW(p.validate());
            EXPECT_DOUBLE_EQ(p.alpha_prime(), 2.0 * static_cast<double>(n + 1) * a);
        }
    }
    AnalysisParams bad = AnalysisParams::for_dimension(1, 0.25);
    bad.alpha = 0.2;
    EXPECT_THROW(bad.validate(), Error);
}

TEST(Seminorm, GaugeExamples) {
    const StarProfile s = cross_profile();
    EXPECT_NEAR(gauge_of_hull(s, Vec{2, 0}), 2.0, 1e-12);
    EXPECT_EQ(gauge_of_hull(s, Vec{0, 0}), 0.0);
    EXPECT_NEAR(gauge_of_hull(s, Vec{0.3, -0.4}), 0.7, 1e-12);
    const GaugeResult g = gauge_with_support(s, Vec{0.3, -0.4});
    EXPECT_NEAR(dot(g.support, Vec{0.3, -0.4}), 0.7, 1e-12);
}

TEST(Seminorm, GaugeMatchesPairOracle) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const StarProfile s = random_profile(seed);
        std::vector<Vec> hull;
        for (std::size_t i = 0; i < s.directions.size(); ++i) hull.push_back(scale(s.directions[i], s.radii[i]));
        Rng rng(seed + 100);
        for (int t = 0; t < 50; ++t) {
            const Vec x{rng.uniform(-3, 3), rng.uniform(-3, 3)};
            EXPECT_NEAR(gauge_of_hull(s, x), oracle::gauge_2d_pairs(hull, x), 1e-4);
        }
    }
}

TEST(Seminorm, GaugeIsSeminorm) {
    for (std::uint64_t seed = 10; seed < 13; ++seed) {
        const StarProfile s = random_profile(seed);
        Rng rng(seed);
        for (int t = 0; t < 200; ++t) {
            const Vec x{rng.uniform(-3, 3), rng.uniform(-3, 3)}, y{rng.uniform(-3, 3), rng.uniform(-3, 3)};
            const double lam = rng.uniform(-3, 3);
            const double gx = gauge_of_hull(s, x);
            EXPECT_NEAR(gauge_of_hull(s, scale(x, lam)), std::abs(lam) * gx, 1e-9 * std::max(1.0, gx));
            EXPECT_LE(gauge_of_hull(s, add(x, y)), gx + gauge_of_hull(s, y) + 1e-9);
            EXPECT_NEAR(gauge_of_hull(s, scale(x, -1.0)), gx, 1e-9);
        }
    }
}

TEST(Seminorm, GaugeRecessionAndEmptyBody) {
    StarProfile s = cross_profile();
    // e2 becomes a recession direction.
    s.radii[1] = s.radii[5] = std::numeric_limits<double>::infinity();
    EXPECT_NEAR(gauge_of_hull(s, Vec{0, 5}), 0.0, 1e-12);
    // Modulo e2 only the first coordinate counts, and e1 is on the boundary.
    EXPECT_NEAR(gauge_of_hull(s, Vec{1, 3}), 1.0, 1e-12);
    EXPECT_NEAR(gauge_of_hull(s, Vec{-0.25, 3}), 0.25, 1e-12);
    StarProfile e = cross_profile();
    for (double& r : e.radii) r = std::numeric_limits<double>::infinity();
    const GaugeResult g = gauge_with_support(e, Vec{1, 1});
    EXPECT_TRUE(g.empty_body);
    EXPECT_EQ(g.value, 0.0);
    StarProfile few;
    few.directions = {Vec{1, 0}, Vec{-1, 0}};
    few.radii = {1, 1};
    EXPECT_THROW(gauge_of_hull(few, Vec{1, 0}), Error);
}

TEST(Seminorm, CaratheodoryExamples) {
    const std::vector<Vec> square{Vec{0, 0}, Vec{1, 0}, Vec{1, 1}, Vec{0, 1}};
    const auto v = caratheodory_membership(square, Vec{1, 1});
    ASSERT_TRUE(v.has_value());
    ASSERT_EQ(v->indices.size(), 1u);
    EXPECT_EQ(v->indices[0], 2u);
    EXPECT_NEAR(v->weights[0], 1.0, 1e-12);
    const auto c = caratheodory_membership(square, Vec{0.5, 0.5});
    ASSERT_TRUE(c.has_value());
    EXPECT_LE(c->indices.size(), 3u);
    double total = 0.0;
    for (double w : c->weights) total += w;
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_FALSE(caratheodory_membership(square, Vec{1.5, 0.5}).has_value());
}

TEST(Seminorm, CaratheodoryRandomInteriorPoints) {
    Rng rng(21);
    for (std::size_t n : {2u, 3u, 4u}) {
        for (int t = 0; t < 20; ++t) {
            std::vector<Vec> pts(12, Vec(n));
            for (auto& p : pts)
                for (double& x : p) x = rng.uniform(-1, 1);
            Vec w(pts.size());
            double tot = 0.0;
            for (double& x : w) tot += (x = rng.uniform());
            Vec x(n, 0.0);
            for (std::size_t j = 0; j < pts.size(); ++j) x = axpy(x, w[j] / tot, pts[j]);
            const auto cc = caratheodory_membership(pts, x);
            ASSERT_TRUE(cc.has_value());
            EXPECT_LE(cc->indices.size(), n + 1);
            Vec r(n, 0.0);
            for (std::size_t k = 0; k < cc->indices.size(); ++k) r = axpy(r, cc->weights[k], pts[cc->indices[k]]);
            EXPECT_LE(dist2(r, x), 1e-9);
        }
    }
}

TEST(Seminorm, SigmaOnNormPullbackIsGaugeRatio) {
    const SampledMap f = sample2(MapSpec::norm_pullback(l1_2d()));
    const AnalysisParams p = AnalysisParams::for_dimension(2);
    const DyadicCube q = cube2(2, 1, 2);
    Rng rng(3);
    for (int t = 0; t < 30; ++t) {
        const Vec c = q.center();
        const Vec x{c[0] + rng.uniform(-0.25, 0.25), c[1] + rng.uniform(-0.25, 0.25)};
        const Vec y{c[0] + rng.uniform(-0.25, 0.25), c[1] + rng.uniform(-0.25, 0.25)};
        if (dist2(x, y) < p.alpha_value() * q.side()) continue;
        const double ratio = l1(sub(x, y)) / dist2(x, y);
        EXPECT_NEAR(sigma(f, q, x, y, p), ratio, 1e-9);
    }
}

TEST(Seminorm, SigmaCornerAntipodal) {
    const SampledMap f = sample1(MapSpec::corner(Vec{0.0}));
    AnalysisParams p = AnalysisParams::for_dimension(1);
    p.chord_points = 129;
    EXPECT_NEAR(sigma(f, root1(), Vec{0.0}, Vec{0.5}, p), 0.0, 1e-12);
}

TEST(Seminorm, SigmaMatchesFinerChord) {
    const SampledMap f = sample1(MapSpec::sawtooth(1, SawtoothMap::standard(2)));
    const AnalysisParams p = AnalysisParams::for_dimension(1);
    const DyadicCube q(root1().grid(), 3, {3});
    const Vec x{-0.2}, y{-0.1};
    const double coarse = sigma(f, q, x, y, p);
    const Box w = sigma_window(q, p.ancestor_depth);
    const double fine = oracle::sigma_direct(f, w, x, y, p.alpha_value() * q.side(), 10 * p.chord_points);
    EXPECT_NEAR(coarse, fine, 0.01);
    EXPECT_GE(coarse, fine - 1e-12);
}

TEST(Seminorm, SigmaErrors) {
    const SampledMap f = sample1(MapSpec::corner(Vec{0.0}));
    const AnalysisParams p = AnalysisParams::for_dimension(1);
    try {
        sigma(f, root1(), Vec{0.0}, Vec{1e-4}, p);
        FAIL() << "expected PointsTooClose";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PointsTooClose);
    }
    // A line that misses 3Q^N.
    const SampledMap g = sample2(MapSpec::corner(Vec{0.0, 0.0}));
    const AnalysisParams p2 = AnalysisParams::for_dimension(2);
    try {
        sigma(g, root2(), Vec{-5, 4}, Vec{5, 4}, p2);
        FAIL() << "expected ShortChord";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShortChord);
    }
}

TEST(Seminorm, ShiftAndDegenerateCaseOnNormedMaps) {
    const SampledMap f = sample2(MapSpec::norm_pullback(PolyhedralSeminorm(2, {Vec{2, 0.5}, Vec{-0.3, 1}, Vec{1, 1}})));
    const AnalysisParams p = AnalysisParams::for_dimension(2);
    const DyadicCube q = cube2(3, 3, 4);
    Rng rng(12);
    const double s = q.side();
    int checked = 0;
    for (int t = 0; t < 60; ++t) {
        const Vec c = q.center();
        const Vec x{c[0] + rng.uniform(-s, s), c[1] + rng.uniform(-s, s)};
        const Vec y{c[0] + rng.uniform(-s, s), c[1] + rng.uniform(-s, s)};
        const Vec z{rng.uniform(-0.5, 0.5) * s, rng.uniform(-0.5, 0.5) * s};
        if (dist2(x, y) < p.alpha_value() * s) continue;
        const double sxy = sigma(f, q, x, y, p);
        EXPECT_LE(sigma(f, q, add(x, z), add(y, z), p), sxy + 0.01);
        const double shifted = f.distance_at(add(x, z), add(y, z));
        EXPECT_LE(std::abs(shifted - f.distance_at(x, y)), 0.01 * s);
        EXPECT_LE(std::abs(f.distance_at(x, y) / dist2(x, y) - sxy), 0.01);
        ++checked;
    }
    EXPECT_GT(checked, 30);
}

TEST(Seminorm, StarProfileExamples) {
    const AnalysisParams p = AnalysisParams::for_dimension(2);
    const DyadicCube q = cube2(2, 1, 1);
    const StarProfile s = build_star_profile(sample2(MapSpec::norm_pullback(l1_2d())), q, p);
    ASSERT_EQ(s.directions.size(), 64u);
    for (std::size_t i = 0; i < s.directions.size(); ++i) EXPECT_NEAR(s.radii[i], 1.0 / l1(s.directions[i]), 1e-6);

    const StarProfile r = build_star_profile(sample2(MapSpec::affine({Vec{1.0, 0.0}})), q, p);
    for (std::size_t i = 0; i < r.directions.size(); ++i) {
        if (std::abs(r.directions[i][0]) < 1e-12) EXPECT_TRUE(std::isinf(r.radii[i]));
        else EXPECT_NEAR(r.radii[i], 1.0 / std::abs(r.directions[i][0]), 1e-9);
    }

    const StarProfile c = build_star_profile(sample1(MapSpec::corner(Vec{0.0})), root1(), AnalysisParams::for_dimension(1));
    ASSERT_EQ(c.radii.size(), 2u);
    EXPECT_TRUE(std::isinf(c.radii[0]) && std::isinf(c.radii[1]));
}

TEST(Seminorm, ConstructRecoversL1) {
    const AnalysisParams p = AnalysisParams::for_dimension(2);
    const PolyhedralSeminorm s = construct_seminorm(sample2(MapSpec::norm_pullback(l1_2d())), cube2(3, 2, 5), p);
    for (const Vec& u : profile_directions(2, 128)) EXPECT_NEAR(s(u), l1(u), 0.02 * l1(u));
}

TEST(Seminorm, ConstructRankOneAndConstant) {
    const AnalysisParams p = AnalysisParams::for_dimension(2);
    const Vec a{0.6, -1.2};
    const PolyhedralSeminorm s = construct_seminorm(sample2(MapSpec::affine({a})), cube2(2, 2, 1), p);
    const Vec kernel{1.2, 0.6};
    EXPECT_LT(s(scale(kernel, 1.0 / norm2(kernel))), 0.02 * norm2(a));
    for (const Vec& u : profile_directions(2, 32)) EXPECT_NEAR(s(u), std::abs(dot(a, u)), 0.02 * norm2(a));
    const PolyhedralSeminorm z = construct_seminorm(sample2(MapSpec::affine({Vec{0.0, 0.0}})), cube2(2, 2, 1), p);
    for (const Vec& u : profile_directions(2, 16)) EXPECT_EQ(z(u), 0.0);
}

TEST(Seminorm, HullSandwichOnNormedMaps) {
    const AnalysisParams p = AnalysisParams::for_dimension(2);
    const double ap = p.alpha_prime();
    for (const auto& g : {l1_2d(), PolyhedralSeminorm(2, {Vec{2, 0.5}, Vec{-0.3, 1}, Vec{1, 1}})}) {
        const SampledMap f = sample2(MapSpec::norm_pullback(g));
        const DyadicCube q = cube2(2, 1, 2);
        const StarProfile s = build_star_profile(f, q, p);
        const Box w = sigma_window(q, p.ancestor_depth);
        for (const Vec& u : s.directions) {
            const double sr = sigma_on_line(f, w, q.center(), u, p.alpha_value() * q.side(), p.chord_points);
            const double gu = gauge_of_hull(s, u);
            EXPECT_GE(gu, sr * (1.0 - ap) - 0.02);
            EXPECT_LE(gu, sr + 0.02);
        }
    }
}

TEST(Seminorm, FitRecoversExactSeminorm) {
    const PolyhedralSeminorm truth(2, {Vec{1, 0}, Vec{0, 0.5}});
    Rng rng(4);
    std::vector<DistancePair> pairs;
    for (int i = 0; i < 300; ++i) {
        const Vec d{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        pairs.push_back({d, truth(d)});
    }
    AnalysisParams p = AnalysisParams::for_dimension(2);
    p.fit_iterations = 60;
    const FitResult r = fit_seminorm(pairs, 2, p);
    EXPECT_LE(r.residual, 1e-6);
    EXPECT_NEAR(sup_residual(r.seminorm, pairs), r.residual, 1e-15);
}

TEST(Seminorm, FitZeroTargetsAndErrors) {
    std::vector<DistancePair> pairs;
    for (int i = 0; i < 12; ++i) pairs.push_back({Vec{0.1 * i, 1.0 - 0.05 * i}, 0.0});
    const AnalysisParams p = AnalysisParams::for_dimension(2);
    const FitResult r = fit_seminorm(pairs, 2, p);
    EXPECT_EQ(r.residual, 0.0);
    EXPECT_EQ(r.seminorm.size(), 0u);
    try {
        fit_seminorm(std::vector<DistancePair>(pairs.begin(), pairs.begin() + 5), 2, p);
        FAIL() << "expected InsufficientPairs";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientPairs);
    }
}

TEST(Seminorm, FitCornerCoefficient) {
    const SampledMap f = sample1(MapSpec::corner(Vec{0.0}));
    const AnalysisParams p = AnalysisParams::for_dimension(1);
    const auto pairs = md_pairs(f, root1().box(), p);
    const FitResult r = fit_seminorm(pairs, 1, p);
    ASSERT_EQ(r.seminorm.size(), 1u);
    EXPECT_NEAR(std::abs(r.seminorm.functionals()[0][0]), 1.0 / 3.0, 0.02);
    EXPECT_NEAR(r.residual / 2.0, oracle::md_1d_scan(f, -1.0, 1.0, 33, 3000, 1.5), 0.02);
}

TEST(Seminorm, ExactOneDimensional) {
    const Md1dResult a = md_exact_1d(sample1(MapSpec::affine({Vec{2.0}})), -1.0, 1.0, 33);
    EXPECT_NEAR(a.coefficient, 2.0, 1e-6);
    EXPECT_NEAR(a.value, 0.0, 1e-6);
    const SampledMap corner = sample1(MapSpec::corner(Vec{0.0}));
    const Md1dResult c = md_exact_1d(corner, -1.0, 1.0, 33);
    EXPECT_NEAR(c.value, oracle::md_1d_scan(corner, -1.0, 1.0, 33, 6000, 1.5), 1e-3);
    EXPECT_NEAR(c.value, 1.0 / 3.0, 1e-6);
    EXPECT_NEAR(c.coefficient, 1.0 / 3.0, 1e-6);
    EXPECT_NEAR(md_exact_1d(corner, 0.2, 0.4, 33).value, 0.0, 1e-6);
    EXPECT_THROW(md_exact_1d(sample2(MapSpec::corner(Vec{0, 0})), -1, 1, 9), Error);
}

TEST(Seminorm, EstimateAgreesWithExactOnCorpus) {
    const AnalysisParams p = AnalysisParams::for_dimension(1);
    for (const auto& spec : {MapSpec::corner(Vec{0.0}), MapSpec::corner(Vec{0.3}), MapSpec::sawtooth(1, SawtoothMap::standard(3)),
                             MapSpec::affine({Vec{-1.5}}), MapSpec::distance_coords({Vec{-0.5}, Vec{0.25}})}) {
        const SampledMap f = sample1(spec);
        for (const auto& q : enumerate_cubes(root1(), 2)) {
            const MdResult est = md_estimate(f, q, 1.0, p);
            const Box b = q.box();
            std::vector<double> xs;
            for (const Vec& x : md_sample_points(b, p)) xs.push_back(x[0]);
            const double exact = md_exact_1d_points(f, b.lower(0), b.upper(0), xs).value;
            EXPECT_NEAR(est.value, exact, 0.02) << spec.name() << " " << q.id();
            EXPECT_LE(est.value, f.lipschitz() + 0.01);
        }
    }
}

TEST(Seminorm, EstimateVanishesForAffineAndZero) {
    const AnalysisParams p = AnalysisParams::for_dimension(2);
    const SampledMap f = sample2(MapSpec::affine({Vec{1.0, -2.0}, Vec{0.5, 0.5}}));
    for (const auto& q : {cube2(1, 0, 1), cube2(3, 4, 2)}) {
        const MdResult r = md_estimate(f, q, 3.0, p);
        EXPECT_LE(r.value, 0.01 * f.lipschitz()) << q.id();
    }
    const MdResult z = md_estimate(sample2(MapSpec::affine({Vec{0.0, 0.0}})), cube2(2, 1, 1), 1.0, p);
    EXPECT_EQ(z.value, 0.0);
    EXPECT_EQ(z.seminorm.size(), 0u);
}

TEST(Seminorm, EstimateBoundedByLipschitz) {
    const AnalysisParams p = AnalysisParams::for_dimension(2);
    const SampledMap f = sample2(MapSpec::corner(Vec{0.1, -0.2}));
    for (const auto& q : {cube2(1, 0, 0), cube2(2, 1, 1), cube2(3, 3, 3)}) {
        const MdResult r = md_estimate(f, q, 1.0, p);
        EXPECT_LE(r.value, std::sqrt(2.0) * f.lipschitz() + 0.01);
        EXPECT_GE(r.value, 0.0);
    }
}

TEST(Seminorm, JsonRoundTrip) {
    const PolyhedralSeminorm s(2, {Vec{0.1, 1.0 / 3.0}, Vec{-2.5, 1e-17}});
    const PolyhedralSeminorm back = seminorm_from_json(Json::parse(to_json(s).dump()));
    EXPECT_EQ(back.functionals(), s.functionals());
    StarProfile sp = random_profile(2, 8);
    sp.radii[1] = sp.radii[5] = std::numeric_limits<double>::infinity();
    const Json j = to_json(sp);
    EXPECT_TRUE(j["radii"][1].is_null());
    const StarProfile r = star_profile_from_json(Json::parse(j.dump()));
    EXPECT_EQ(r.directions, sp.directions);
    EXPECT_EQ(r.radii, sp.radii);
}
