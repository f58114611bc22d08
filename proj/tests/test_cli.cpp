#include <gtest/gtest.h>

#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include "metricdiff/cli.hpp"

using namespace metricdiff;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string out, err;
};

CliRun run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    CliRun r;
    r.code = cli::run_command(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("metricdiff_cli_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

Json load(const fs::path& p) { return Json::parse(slurp(p)); }

class EnvGuard {
public:
    explicit EnvGuard(const char* name) : name_(name) {
        if (const char* v = std::getenv(name)) old_ = v;
    }
    ~EnvGuard() {
        if (old_) ::setenv(name_, old_->c_str(), 1);
        else ::unsetenv(name_);
    }

private:
    const char* name_;
    std::optional<std::string> old_;
};

}  // namespace

TEST(Cli, CorpusListShowsSixFamilies) {
    const CliRun r = run({"corpus-list"});
    EXPECT_EQ(r.code, 0);
    for (const char* f : {"affine", "norm_pullback", "corner", "sawtooth", "distance_coords", "broken_curve"})
        EXPECT_NE(r.out.find(std::string(f) + "  --"), std::string::npos) << f;
}

TEST(Cli, ConfigErrorsExitOne) {
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"bogus"}).code, 1);
    EXPECT_EQ(run({"analyze-md", "--no-such-flag"}).code, 1);
    const fs::path out = scratch("cfgerr");
    const CliRun unknown = run({"analyze-md", "--map", "nope", "--out", out.string()});
    EXPECT_EQ(unknown.code, 1);
    EXPECT_NE(unknown.err.find("unknown map family"), std::string::npos) << unknown.err;
    EXPECT_EQ(run({"analyze-md", "--delta", "-0.1", "--out", out.string()}).code, 1);
    EXPECT_EQ(run({"analyze-md", "--format", "xml", "--out", out.string()}).code, 1);
    EXPECT_EQ(run({"analyze-md", "--alpha", "0.9", "--out", out.string()}).code, 1);
    EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, AnalyzeMdCornerExample) {
    const fs::path out = scratch("md");
    const CliRun r = run({"analyze-md", "--map", "corner", "--c", "0", "--n", "1", "--depth", "8", "--delta", "0.25",
                       "--seed", "7", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("analyze-md: map=corner"), std::string::npos);
    const Json doc = load(out / "analyze-md.json");
    EXPECT_EQ(doc["schema_version"], 1);
    EXPECT_EQ(doc["kind"], "packing");
    EXPECT_EQ(doc["config"]["params"]["seed"], 7);
    const double ratio = doc["result"][0]["ratio"];
    EXPECT_GT(ratio, 0.0);
    EXPECT_LE(ratio, 4.0);
    EXPECT_EQ(first_line(out / "analyze-md_delta-0.25.csv"), "level,bad_count,bad_volume");
    EXPECT_TRUE(fs::exists(out / "analyze-md.meta.json"));
}

TEST(Cli, AnalyzeBetaAffineExample) {
    const fs::path out = scratch("beta");
    const CliRun r = run({"analyze-beta", "--map", "affine", "--A", "2", "--n", "1", "--depth", "8", "--N", "2", "--out",
                       out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const Json doc = load(out / "analyze-beta.json");
    EXPECT_LE(static_cast<double>(doc["result"]["total"]), 1e-9);
    EXPECT_EQ(first_line(out / "analyze-beta.csv"), "level,beta_sum");
}

TEST(Cli, ScanPointCsvSchema) {
    const fs::path out = scratch("scan");
    const CliRun r = run({"scan-point", "--map", "corner", "--depth", "6", "--z", "0.3", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(first_line(out / "scan-point.csv"), "level,side,md");
    EXPECT_EQ(load(out / "scan-point.json")["result"].size(), 7u);
}

TEST(Cli, FormatSelectsOutputs) {
    const fs::path a = scratch("fmt_csv"), b = scratch("fmt_rec");
    ASSERT_EQ(run({"scan-point", "--depth", "3", "--format", "csv", "--out", a.string()}).code, 0);
    EXPECT_TRUE(fs::exists(a / "scan-point.csv"));
    EXPECT_FALSE(fs::exists(a / "scan-point.json"));
    ASSERT_EQ(run({"scan-point", "--depth", "3", "--format", "record", "--out", b.string()}).code, 0);
    EXPECT_FALSE(fs::exists(b / "scan-point.csv"));
    EXPECT_TRUE(fs::exists(b / "scan-point.json"));
}

TEST(Cli, RerunsAreByteIdentical) {
    for (const std::string cmd : {"analyze-md", "analyze-beta", "scan-point", "beta-md"}) {
        const fs::path a = scratch("rep_a"), b = scratch("rep_b");
        const std::vector<std::string> base{cmd, "--map", "sawtooth", "--K", "3", "--depth", "4", "--seed", "11",
                                            "--delta", "0.1,0.25", "--lines", "64", "--m", "16"};
        auto with_out = [&](const fs::path& o) {
            auto v = base;
            v.insert(v.end(), {"--out", o.string()});
            return v;
        };
        ASSERT_EQ(run(with_out(a)).code, 0) << cmd;
        ASSERT_EQ(run(with_out(b)).code, 0) << cmd;
        std::size_t compared = 0;
        for (const auto& e : fs::directory_iterator(a)) {
            const std::string name = e.path().filename().string();
            if (name.ends_with(".meta.json")) continue;
            EXPECT_EQ(slurp(e.path()), slurp(b / name)) << cmd << " " << name;
            ++compared;
        }
        EXPECT_GE(compared, 2u) << cmd;
    }
}

TEST(Cli, ConfigFileWithFlagOverride) {
    const fs::path dir = scratch("config");
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "run.ini");
        cfg << "map = sawtooth\nK = 3\ndepth = 5\nseed = 21\n";
    }
    const fs::path out = dir / "out";
    const CliRun r = run({"scan-point", "--config", (dir / "run.ini").string(), "--depth", "3", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const Json doc = load(out / "scan-point.json");
    EXPECT_EQ(doc["config"]["map"], "sawtooth");
    EXPECT_EQ(doc["config"]["family_params"]["K"], "3");
    EXPECT_EQ(doc["config"]["depth"], 3);
    EXPECT_EQ(doc["config"]["params"]["seed"], 21);
    EXPECT_EQ(run({"scan-point", "--config", (dir / "missing.ini").string()}).code, 1);
}

TEST(Cli, SeedFallsBackToEnvironment) {
    EnvGuard guard("METRICDIFF_SEED");
    const fs::path out = scratch("seed");
    auto seed_of = [&](std::vector<std::string> extra) {
        std::vector<std::string> args{"scan-point", "--depth", "2", "--out", out.string()};
        args.insert(args.end(), extra.begin(), extra.end());
        const CliRun r = run(args);
        EXPECT_EQ(r.code, 0) << r.err;
        return load(out / "scan-point.json")["config"]["params"]["seed"].get<std::uint64_t>();
    };
    ::unsetenv("METRICDIFF_SEED");
    EXPECT_EQ(seed_of({}), 1u);
    ::setenv("METRICDIFF_SEED", "9", 1);
    EXPECT_EQ(seed_of({}), 9u);
    EXPECT_EQ(seed_of({"--seed", "4"}), 4u);
    ::setenv("METRICDIFF_SEED", "nine", 1);
    EXPECT_EQ(run({"scan-point", "--depth", "2", "--out", out.string()}).code, 1);
}

TEST(Cli, IoFailuresExitTwo) {
    const fs::path dir = scratch("io");
    fs::create_directories(dir);
    { std::ofstream(dir / "file") << "x"; }
    const CliRun blocked = run({"scan-point", "--depth", "2", "--out", (dir / "file" / "sub").string()});
    EXPECT_EQ(blocked.code, 2);
    EXPECT_NE(blocked.err.find("io error"), std::string::npos) << blocked.err;
    EXPECT_EQ(run({"scan-point", "--map-file", (dir / "absent.csv").string(), "--out", dir.string()}).code, 2);
}

TEST(Cli, NumericalFailureExitsTwo) {
    // A table with step 1/4 cannot resolve cubes at level 6.
    const fs::path dir = scratch("coarse");
    fs::create_directories(dir);
    {
        std::ofstream csv(dir / "map.csv");
        for (int i = -12; i <= 12; ++i) csv << format_double(i * 0.25) << "," << format_double(std::abs(i * 0.25)) << "\n";
    }
    const CliRun r = run({"analyze-md", "--map-file", (dir / "map.csv").string(), "--depth", "6", "--out", dir.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("numerical failure"), std::string::npos) << r.err;
    EXPECT_EQ(run({"analyze-md", "--map-file", (dir / "map.csv").string(), "--depth", "0", "--N", "0", "--out",
                   dir.string()})
                  .code,
              0);
}

TEST(Cli, BinaryExitCodes) {
    const fs::path out = scratch("bin");
    auto status = [](const std::string& cmd) {
        const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    const std::string bin = METRICDIFF_CLI_PATH;
    EXPECT_EQ(status(bin + " corpus-list"), 0);
    EXPECT_EQ(status(bin + " analyze-md --map nope --out " + out.string()), 1);
    EXPECT_EQ(status(bin + " scan-point --depth 2 --map-file " + (out / "absent.csv").string()), 2);
    EXPECT_EQ(status(bin + " scan-point --depth 2 --out " + out.string()), 0);
    EXPECT_TRUE(fs::exists(out / "scan-point.json"));
}
