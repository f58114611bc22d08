#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "metricdiff/beta.hpp"
#include "metricdiff/carleson.hpp"
#include "metricdiff/polyhedral.hpp"
#include "metricdiff/seminorm.hpp"

namespace metricdiff {

using Json = nlohmann::ordered_json;

inline constexpr int schema_version = 1;

inline Json to_json(const Vec& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(x);
    return a;
}

inline Json to_json(const PolyhedralSeminorm& s) {
    Json f = Json::array();
    for (const Vec& a : s.functionals()) f.push_back(to_json(a));
    return Json{{"K", s.size()}, {"functionals", std::move(f)}};
}

inline PolyhedralSeminorm seminorm_from_json(const Json& j) {
    std::vector<Vec> f;
    for (const auto& a : j.at("functionals")) f.push_back(a.get<Vec>());
    if (j.at("K").get<std::size_t>() != f.size()) throw Error(ErrorCode::InvalidArgument, "K does not match functional count");
    const std::size_t n = f.empty() ? j.value("dim", std::size_t{0}) : f.front().size();
    return PolyhedralSeminorm(n, std::move(f));
}

// Infinite radii are written as null.
inline Json to_json(const StarProfile& s) {
    Json dirs = Json::array(), radii = Json::array();
    for (const Vec& u : s.directions) dirs.push_back(to_json(u));
    for (double r : s.radii) radii.push_back(std::isfinite(r) ? Json(r) : Json(nullptr));
    return Json{{"directions", std::move(dirs)}, {"radii", std::move(radii)}};
}

inline StarProfile star_profile_from_json(const Json& j) {
    StarProfile s;
    for (const auto& u : j.at("directions")) s.directions.push_back(u.get<Vec>());
    for (const auto& r : j.at("radii"))
        s.radii.push_back(r.is_null() ? std::numeric_limits<double>::infinity() : r.get<double>());
    if (s.directions.size() != s.radii.size()) throw Error(ErrorCode::InvalidArgument, "directions and radii differ in length");
    return s;
}

inline Json to_json(const AnalysisParams& p) {
    return Json{{"n", p.n},
                {"alpha", p.alpha_value()},
                {"alpha_prime", p.alpha_prime()},
                {"N", p.ancestor_depth},
                {"delta", p.delta},
                {"epsilon", p.epsilon},
                {"sigma_floor", p.sigma_floor},
                {"directions", p.direction_count()},
                {"chord_points", p.chord_points},
                {"grid_nodes", p.grid_count()},
                {"pair_points", p.lowdisc_count()},
                {"K", p.functional_count()},
                {"fit_iterations", p.fit_iterations},
                {"fit_starts", p.fit_starts},
                {"fit_pairs", p.fit_pairs},
                {"seed", p.seed}};
}

inline Json to_json(const QuadratureSpec& q) {
    return Json{{"m", q.m}, {"mc_lines", q.mc_lines}, {"seed", q.seed}};
}

inline Json to_json(const PackingReport& r) {
    Json levels = Json::array();
    for (const auto& l : r.per_level)
        levels.push_back(Json{{"level", l.level}, {"bad_count", l.bad_count}, {"bad_volume", l.bad_volume}});
    return Json{{"delta", r.delta},
                {"shift", to_json(r.shift.offset)},
                {"depth", r.depth},
                {"total_bad_volume", r.total_bad_volume},
                {"ratio", r.ratio},
                {"lipschitz", r.lipschitz},
                {"lipschitz_spec", r.lipschitz_spec ? Json(*r.lipschitz_spec) : Json(nullptr)},
                {"per_level", std::move(levels)},
                {"md_params", to_json(r.params)}};
}

inline Json to_json(const BetaCarlesonReport& r) {
    Json levels = Json::array();
    for (const auto& l : r.per_level) levels.push_back(Json{{"level", l.level}, {"sum", l.sum}});
    return Json{{"total", r.total},
                {"lipschitz", r.lipschitz},
                {"ratio", r.ratio},
                {"depth", r.depth},
                {"N", r.ancestor_depth},
                {"clamped_count", r.clamped_count},
                {"seed", r.seed},
                {"per_level", std::move(levels)}};
}

inline Json to_json(const std::vector<ScanRow>& rows) {
    Json a = Json::array();
    for (const auto& r : rows) a.push_back(Json{{"level", r.level}, {"side", r.side}, {"md", r.md}, {"cube", r.cube}});
    return a;
}

inline Json to_json(const std::vector<BetaMdRow>& rows) {
    Json a = Json::array();
    for (const auto& r : rows)
        a.push_back(Json{{"cube", r.cube}, {"level", r.level}, {"beta_lift", r.beta_lift}, {"md", r.md}});
    return a;
}

// ---------------------------------------------------------------------------
// CSV

// Shortest decimal that round-trips, so CSV and records agree byte for byte
// across runs.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return Json(x).dump();
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<std::string> row) {
        if (row.size() != header_.size()) throw Error(ErrorCode::InvalidArgument, "CSV row width mismatch");
        rows_.push_back(std::move(row));
    }

    void write(std::ostream& out) const {
        write_row(out, header_);
        for (const auto& r : rows_) write_row(out, r);
    }

    std::string str() const {
        std::ostringstream s;
        write(s);
        return s.str();
    }

private:
    static void write_row(std::ostream& out, const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
        out << '\n';
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline CsvTable packing_csv(const PackingReport& r) {
    CsvTable t({"level", "bad_count", "bad_volume"});
    for (const auto& l : r.per_level) t.add({std::to_string(l.level), std::to_string(l.bad_count), format_double(l.bad_volume)});
    return t;
}

inline CsvTable beta_csv(const BetaCarlesonReport& r) {
    CsvTable t({"level", "beta_sum"});
    for (const auto& l : r.per_level) t.add({std::to_string(l.level), format_double(l.sum)});
    return t;
}

inline CsvTable scan_csv(const std::vector<ScanRow>& rows) {
    CsvTable t({"level", "side", "md"});
    for (const auto& r : rows) t.add({std::to_string(r.level), format_double(r.side), format_double(r.md)});
    return t;
}

inline CsvTable beta_md_csv(const std::vector<BetaMdRow>& rows) {
    CsvTable t({"cube", "level", "beta_lift", "md"});
    for (const auto& r : rows) t.add({"\"" + r.cube + "\"", std::to_string(r.level), format_double(r.beta_lift), format_double(r.md)});
    return t;
}

// ---------------------------------------------------------------------------
// Files

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

inline std::string record_text(const std::string& kind, const Json& config, const Json& result) {
    Json doc{{"schema_version", schema_version}, {"kind", kind}, {"config", config}, {"result", result}};
    return doc.dump(2) + "\n";
}

}  // namespace metricdiff
