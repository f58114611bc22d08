#pragma once

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metricdiff/beta.hpp"
#include "metricdiff/carleson.hpp"
#include "metricdiff/corpus.hpp"
#include "metricdiff/parallel.hpp"
#include "metricdiff/report.hpp"
#include "metricdiff/seminorm.hpp"

namespace metricdiff::cli {

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"corpus-list", "analyze-md", "analyze-beta", "scan-point", "beta-md"};
    return c;
}

struct RunConfig {
    std::string command;
    std::string map = "corner";
    std::size_t n = 1;
    double root_lo = -1.0;
    double root_side = 2.0;
    int depth = 6;
    std::vector<double> deltas{0.25};
    std::string alpha = "auto";
    int N = 2;
    std::optional<std::uint64_t> seed;
    std::size_t lines = 256;
    std::size_t m = 64;
    std::size_t pairs = 0;
    std::size_t directions = 0;
    std::string out = "metricdiff-out";
    std::string format = "both";
    std::size_t workers = default_workers();
    bool lift = false;
    bool shifted = false;
    std::string z;

    // Family parameters.
    std::string c, A, K, gauge, points, vertices, amplitudes, periods;
    std::string map_file, matrix_file;
};

// ---------------------------------------------------------------------------
// Parsing helpers

inline Vec parse_list(const std::string& s, const char* what) {
    Vec v;
    std::string tok;
    std::istringstream in(s);
    while (std::getline(in, tok, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(tok, &used));
            if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, std::string("bad number '") + tok + "' in --" + what);
        }
    }
    if (v.empty()) throw Error(ErrorCode::InvalidArgument, std::string("empty --") + what);
    return v;
}

inline std::vector<Vec> parse_rows(const std::string& s, const char* what) {
    std::vector<Vec> rows;
    std::string tok;
    std::istringstream in(s);
    while (std::getline(in, tok, ';'))
        if (tok.find_first_not_of(" \t") != std::string::npos) rows.push_back(parse_list(tok, what));
    if (rows.empty()) throw Error(ErrorCode::InvalidArgument, std::string("empty --") + what);
    for (const Vec& r : rows)
        if (r.size() != rows.front().size()) throw Error(ErrorCode::InvalidArgument, std::string("ragged rows in --") + what);
    return rows;
}

inline std::vector<Vec> require_width(std::vector<Vec> rows, std::size_t n, const char* what) {
    if (rows.front().size() != n)
        throw Error(ErrorCode::InvalidArgument, std::string("--") + what + " entries must have " + std::to_string(n) + " coordinates");
    return rows;
}

inline PolyhedralSeminorm parse_gauge(const std::string& g, std::size_t n) {
    if (g.empty() || g == "l1") {
        // l1 is the max over sign vectors with first sign +.
        std::vector<Vec> f;
        for (std::size_t mask = 0; mask < (std::size_t{1} << (n - 1)); ++mask) {
            Vec a(n, 1.0);
            for (std::size_t i = 1; i < n; ++i)
                if (mask >> (i - 1) & 1) a[i] = -1.0;
            f.push_back(std::move(a));
        }
        return PolyhedralSeminorm(n, std::move(f));
    }
    if (g == "linf") {
        std::vector<Vec> f;
        for (std::size_t i = 0; i < n; ++i) {
            Vec e(n, 0.0);
            e[i] = 1.0;
            f.push_back(std::move(e));
        }
        return PolyhedralSeminorm(n, std::move(f));
    }
    return PolyhedralSeminorm(n, require_width(parse_rows(g, "gauge"), n, "gauge"));
}

/// Builds the map spec named by cfg.map from the family flags.
inline MapSpec build_spec(const RunConfig& cfg) {
    const std::size_t n = cfg.n;
    MapSpec spec = MapSpec::corner(Vec(n, 0.0));
    if (cfg.map == "affine") {
        std::vector<Vec> rows;
        const std::string a = cfg.A.empty() ? "1" : cfg.A;
        if (a.find_first_of(",;") == std::string::npos) {
            const double s = parse_list(a, "A").front();
            for (std::size_t i = 0; i < n; ++i) {
                Vec r(n, 0.0);
                r[i] = s;
                rows.push_back(std::move(r));
            }
        } else {
            rows = require_width(parse_rows(a, "A"), n, "A");
        }
        spec = MapSpec::affine(std::move(rows));
    } else if (cfg.map == "norm_pullback") {
        spec = MapSpec::norm_pullback(parse_gauge(cfg.gauge, n));
    } else if (cfg.map == "corner") {
        Vec c = cfg.c.empty() ? Vec(n, 0.0) : parse_list(cfg.c, "c");
        if (c.size() == 1 && n > 1) c.assign(n, c.front());
        spec = MapSpec::corner(std::move(c));
    } else if (cfg.map == "sawtooth") {
        int k = 4;
        if (!cfg.K.empty()) {
            const double kv = parse_list(cfg.K, "K").front();
            if (!(kv >= 1.0) || kv != std::floor(kv)) throw Error(ErrorCode::InvalidArgument, "--K must be a positive integer");
            k = static_cast<int>(kv);
        }
        SawtoothMap s = SawtoothMap::standard(k);
        if (!cfg.amplitudes.empty()) s.amplitudes = parse_list(cfg.amplitudes, "amplitudes");
        if (!cfg.periods.empty()) s.periods = parse_list(cfg.periods, "periods");
        spec = MapSpec::sawtooth(n, std::move(s));
    } else if (cfg.map == "distance_coords") {
        std::vector<Vec> pts;
        if (cfg.points.empty()) {
            pts = {Vec(n, -0.5), Vec(n, 0.25)};
        } else {
            pts = require_width(parse_rows(cfg.points, "points"), n, "points");
        }
        spec = MapSpec::distance_coords(std::move(pts));
    } else if (cfg.map == "broken_curve") {
        if (n != 1) throw Error(ErrorCode::InvalidArgument, "broken_curve requires --n 1");
        std::vector<Vec> v = cfg.vertices.empty() ? std::vector<Vec>{{0, 0}, {1, 0}, {1, 1}, {0, 1}}
                                                  : parse_rows(cfg.vertices, "vertices");
        spec = MapSpec::broken_curve(std::move(v));
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown map family '" + cfg.map + "' (see corpus-list)");
    }
    return spec;
}

inline DyadicCube build_root(const RunConfig& cfg) {
    if (!(cfg.root_side > 0.0)) throw Error(ErrorCode::InvalidArgument, "--root-side must be positive");
    return DyadicCube::root(Grid{Vec(cfg.n, cfg.root_lo), cfg.root_side, GridShift{Vec(cfg.n, 0.0)}});
}

inline std::uint64_t resolve_seed(const RunConfig& cfg) {
    if (cfg.seed) return *cfg.seed;
    if (const char* env = std::getenv("METRICDIFF_SEED"); env && *env) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(env, &used);
            if (env[used] != '\0') throw std::invalid_argument(env);
            return v;
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, std::string("METRICDIFF_SEED is not an integer: ") + env);
        }
    }
    return 1;
}

inline AnalysisParams build_params(const RunConfig& cfg, std::uint64_t seed) {
    double dmin = cfg.deltas.front();
    for (double d : cfg.deltas) dmin = std::min(dmin, d);
    AnalysisParams p;
    p.n = cfg.n;
    p.delta = dmin;
    p.ancestor_depth = cfg.N;
    p.seed = seed;
    p.directions = cfg.directions;
    p.pair_points = cfg.pairs;
    if (cfg.alpha == "auto") {
        p.alpha = auto_alpha(dmin, cfg.n);
    } else {
        p.alpha = parse_list(cfg.alpha, "alpha").front();
    }
    p.validate();
    return p;
}

/// The map under analysis: a CSV table when --map-file is given, otherwise the
/// named family sampled with 8 nodes per side at the finest analyzed level.
inline SampledMap build_map(const RunConfig& cfg, std::uint64_t seed, int finest_level) {
    const DyadicCube root = build_root(cfg);
    SamplingOptions opts;
    opts.seed = seed;
    opts.analysis_depth = finest_level;
    if (!cfg.map_file.empty()) return load_map_csv(cfg.map_file, root, cfg.matrix_file, opts);
    const MapSpec spec = build_spec(cfg);
    if (spec.dim() != cfg.n) throw Error(ErrorCode::InvalidArgument, "map dimension differs from --n");
    const double h = std::ldexp(root.side(), -(finest_level + 3));
    return sample_map(spec, root, h, required_margin(cfg.N), opts);
}

inline Json config_json(const RunConfig& cfg, const AnalysisParams& p) {
    Json deltas = Json::array();
    for (double d : cfg.deltas) deltas.push_back(d);
    Json j{{"command", cfg.command}, {"map", cfg.map_file.empty() ? cfg.map : "table"}, {"n", cfg.n},
           {"root_lo", cfg.root_lo}, {"root_side", cfg.root_side}, {"depth", cfg.depth},
           {"delta", std::move(deltas)}, {"params", to_json(p)}};
    Json fam = Json::object();
    auto put = [&](const char* k, const std::string& v) {
        if (!v.empty()) fam[k] = v;
    };
    put("c", cfg.c);
    put("A", cfg.A);
    put("K", cfg.K);
    put("gauge", cfg.gauge);
    put("points", cfg.points);
    put("vertices", cfg.vertices);
    put("amplitudes", cfg.amplitudes);
    put("periods", cfg.periods);
    put("map_file", cfg.map_file);
    put("matrix_file", cfg.matrix_file);
    j["family_params"] = std::move(fam);
    return j;
}

// ---------------------------------------------------------------------------
// Output

class Emitter {
public:
    Emitter(const RunConfig& cfg) : dir_(cfg.out), format_(cfg.format) {}

    bool records() const { return format_ == "record" || format_ == "both"; }
    bool csv() const { return format_ == "csv" || format_ == "both"; }

    void record(const std::string& name, const std::string& kind, const Json& config, const Json& result) {
        if (records()) put(name + ".json", record_text(kind, config, result));
    }

    void table(const std::string& name, const CsvTable& t) {
        if (csv()) put(name + ".csv", t.str());
    }

    void sidecar(const std::string& name, const std::string& started, double seconds) {
        Json meta{{"started_utc", started}, {"elapsed_seconds", seconds}};
        write_text(dir_ / (name + ".meta.json"), meta.dump(2) + "\n");
    }

    const std::vector<std::string>& written() const { return written_; }

private:
    void put(const std::string& file, const std::string& text) {
        write_text(dir_ / file, text);
        written_.push_back((dir_ / file).string());
    }

    std::filesystem::path dir_;
    std::string format_;
    std::vector<std::string> written_;
};

inline std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string delta_tag(double d) {
    std::string s = format_double(d);
    return s;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_corpus_list(std::ostream& out) {
    for (const auto& f : corpus_families()) out << f.name << "  " << f.parameters << '\n';
    out << "table  --map-file <csv> [--matrix <distance matrix>] (raw grid data)\n";
    return 0;
}

struct Prepared {
    std::uint64_t seed = 1;
    AnalysisParams params;
    SampledMap map;
    Json config;
};

inline Prepared prepare(const RunConfig& cfg, int finest_level) {
    if (cfg.n < 1 || cfg.n > 3) throw Error(ErrorCode::InvalidArgument, "--n must be 1, 2 or 3");
    if (cfg.depth < 0) throw Error(ErrorCode::InvalidArgument, "--depth must be nonnegative");
    if (cfg.N < 0) throw Error(ErrorCode::InvalidArgument, "--N must be nonnegative");
    for (double d : cfg.deltas)
        if (!(d > 0.0)) throw Error(ErrorCode::InvalidArgument, "--delta values must be positive");
    if (cfg.format != "record" && cfg.format != "csv" && cfg.format != "both")
        throw Error(ErrorCode::InvalidArgument, "--format must be record, csv or both");
    QuadratureSpec{cfg.m, cfg.lines, 1}.validate();
    Prepared p;
    p.seed = resolve_seed(cfg);
    p.params = build_params(cfg, p.seed);
    p.map = build_map(cfg, p.seed, finest_level);
    p.config = config_json(cfg, p.params);
    p.config["quadrature"] = to_json(QuadratureSpec{cfg.m, cfg.lines, p.seed});
    p.config["lift"] = cfg.lift;
    p.config["shifted"] = cfg.shifted;
    p.config["lipschitz_estimate"] = p.map.lipschitz();
    return p;
}

inline int cmd_analyze_md(const RunConfig& cfg, const Prepared& pr, Emitter& em, std::ostream& out) {
    std::vector<DyadicCube> roots{pr.map.root()};
    if (cfg.shifted) roots = shifted_roots(pr.map.root());
    Json result = Json::array();
    double first_ratio = 0.0;
    for (std::size_t s = 0; s < roots.size(); ++s) {
        const auto reps = md_packing_sums(pr.map, roots[s], cfg.deltas, cfg.depth, pr.params, cfg.workers);
        for (const auto& r : reps) {
            result.push_back(to_json(r));
            std::string name = "analyze-md_delta-" + delta_tag(r.delta);
            if (cfg.shifted) name = "analyze-md_shift-" + std::to_string(s) + "_delta-" + delta_tag(r.delta);
            em.table(name, packing_csv(r));
        }
        if (s == 0) first_ratio = reps.front().ratio;
    }
    em.record("analyze-md", "packing", pr.config, result);
    out << "analyze-md: map=" << pr.map.family() << " n=" << cfg.n << " depth=" << cfg.depth
        << " delta=" << format_double(cfg.deltas.front()) << " ratio=" << format_double(first_ratio)
        << " L_hat=" << format_double(pr.map.lipschitz()) << '\n';
    return 0;
}

inline int cmd_analyze_beta(const RunConfig& cfg, const Prepared& pr, Emitter& em, std::ostream& out) {
    const QuadratureSpec q{cfg.m, cfg.lines, pr.seed};
    const SampledMap f = cfg.lift ? lift_map(pr.map) : pr.map;
    const auto rep = carleson_beta_sum(f, f.root(), cfg.depth, cfg.N, q, cfg.workers);
    em.record("analyze-beta", "beta_carleson", pr.config, to_json(rep));
    em.table("analyze-beta", beta_csv(rep));
    out << "analyze-beta: map=" << f.family() << " n=" << cfg.n << " depth=" << cfg.depth << " N=" << cfg.N
        << " total=" << format_double(rep.total) << " ratio=" << format_double(rep.ratio) << '\n';
    return 0;
}

inline int cmd_scan_point(const RunConfig& cfg, const Prepared& pr, Emitter& em, std::ostream& out) {
    Vec z = cfg.z.empty() ? pr.map.root().center() : parse_list(cfg.z, "z");
    if (z.size() == 1 && cfg.n > 1) z.assign(cfg.n, z.front());
    const auto rows = kirchheim_scan(pr.map, z, cfg.depth, pr.params, cfg.workers);
    Json config = pr.config;
    config["z"] = to_json(z);
    em.record("scan-point", "kirchheim_scan", config, to_json(rows));
    em.table("scan-point", scan_csv(rows));
    out << "scan-point: map=" << pr.map.family() << " z=" << to_json(z).dump() << " levels=0.." << cfg.depth
        << " md_finest=" << format_double(rows.back().md) << '\n';
    return 0;
}

inline int cmd_beta_md(const RunConfig& cfg, const Prepared& pr, Emitter& em, std::ostream& out) {
    const QuadratureSpec q{cfg.m, cfg.lines, pr.seed};
    const auto rows = beta_vs_md_table(pr.map, pr.map.root(), cfg.depth, pr.params, q, cfg.workers);
    em.record("beta-md", "beta_vs_md", pr.config, to_json(rows));
    em.table("beta-md", beta_md_csv(rows));
    std::size_t low = 0, low_bad = 0;
    for (const auto& r : rows) {
        if (r.beta_lift < pr.params.epsilon) {
            ++low;
            if (r.md >= 0.05) ++low_bad;
        }
    }
    out << "beta-md: map=" << pr.map.family() << " rows=" << rows.size() << " beta<" << format_double(pr.params.epsilon)
        << ": " << low << " (md>=0.05: " << low_bad << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Entry point

/// 1 for bad input or configuration, 2 for IO and numerical failures.
inline int exit_code(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidMetric:
    case ErrorCode::BackendMismatch:
    case ErrorCode::OutOfDomain: return 1;
    default: return 2;
    }
}

inline const char* error_label(ErrorCode code) {
    if (code == ErrorCode::Io) return "io error: ";
    return exit_code(code) == 1 ? "config error: " : "numerical failure: ";
}

inline void add_options(CLI::App& app, RunConfig& cfg, std::optional<std::uint64_t>& seed) {
    app.add_option("command", cfg.command, "corpus-list | analyze-md | analyze-beta | scan-point | beta-md")
        ->required()
        ->check(CLI::IsMember(commands()));
    app.set_config("--config", "", "flat key=value file mirroring the flags");
    app.add_option("--map", cfg.map, "map family (see corpus-list)");
    app.add_option("--n", cfg.n, "domain dimension");
    app.add_option("--root-lo", cfg.root_lo, "lower corner coordinate of the root cube");
    app.add_option("--root-side", cfg.root_side, "root cube side");
    app.add_option("--depth", cfg.depth, "levels below the root (max level for scan-point)");
    app.add_option("--delta", cfg.deltas, "md thresholds relative to L_hat")->delimiter(',');
    app.add_option("--alpha", cfg.alpha, "separation fraction, or auto");
    app.add_option("--N", cfg.N, "ancestor generations for 3Q^N");
    app.add_option("--seed", seed, "RNG seed (fallback: METRICDIFF_SEED, then 1)");
    app.add_option("--lines", cfg.lines, "Monte Carlo lines per cube");
    app.add_option("--m", cfg.m, "quadrature nodes per segment");
    app.add_option("--pairs", cfg.pairs, "low-discrepancy points for md pair sampling (0: default)");
    app.add_option("--directions", cfg.directions, "star profile directions (0: default)");
    app.add_option("--out", cfg.out, "output directory");
    app.add_option("--format", cfg.format, "record | csv | both");
    app.add_option("--workers", cfg.workers, "worker threads");
    app.add_flag("--lift", cfg.lift, "analyze-beta: use the lifted map x -> (x, f(x))");
    app.add_flag("--shifted", cfg.shifted, "analyze-md: repeat on all 3^n shifted grids");
    app.add_option("--z", cfg.z, "scan-point: point (comma-separated)");
    app.add_option("--c", cfg.c, "corner location");
    app.add_option("--A", cfg.A, "affine matrix rows, or a scalar multiple of the identity");
    app.add_option("--K", cfg.K, "sawtooth levels");
    app.add_option("--amplitudes", cfg.amplitudes, "sawtooth amplitudes");
    app.add_option("--periods", cfg.periods, "sawtooth periods");
    app.add_option("--gauge", cfg.gauge, "norm_pullback gauge: l1, linf or functional rows");
    app.add_option("--points", cfg.points, "distance_coords points");
    app.add_option("--vertices", cfg.vertices, "broken_curve vertices");
    app.add_option("--map-file", cfg.map_file, "raw map CSV");
    app.add_option("--matrix", cfg.matrix_file, "distance matrix file for index-valued map CSVs");
}

/// Runs one command. Exit codes: 0 success, 1 configuration error, 2
/// numerical or IO failure.
inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"metricdiff: multiscale metric differentiation diagnostics"};
    RunConfig cfg;
    std::optional<std::uint64_t> seed;
    add_options(app, cfg, seed);
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "config error: " << e.what() << '\n';
        return 1;
    }
    cfg.seed = seed;

    if (cfg.command == "corpus-list") return cmd_corpus_list(out);

    const int finest = cfg.depth;
    const auto start = std::chrono::steady_clock::now();
    const std::string started = utc_now();
    Prepared pr;
    try {
        pr = prepare(cfg, finest);
    } catch (const Error& e) {
        err << error_label(e.code()) << e.what() << '\n';
        return exit_code(e.code());
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return 1;
    }

    try {
        Emitter em(cfg);
        int rc = 0;
        if (cfg.command == "analyze-md") rc = cmd_analyze_md(cfg, pr, em, out);
        else if (cfg.command == "analyze-beta") rc = cmd_analyze_beta(cfg, pr, em, out);
        else if (cfg.command == "scan-point") rc = cmd_scan_point(cfg, pr, em, out);
        else rc = cmd_beta_md(cfg, pr, em, out);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        em.sidecar(cfg.command, started, secs);
        return rc;
    } catch (const Error& e) {
        err << (e.code() == ErrorCode::Io ? "io error: " : "numerical failure: ") << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

inline int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    std::vector<const char*> argv{"metricdiff"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_command(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace metricdiff::cli
