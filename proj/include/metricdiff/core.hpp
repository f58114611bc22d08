#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metricdiff {

using Vec = std::vector<double>;

enum class ErrorCode {
    AboveRoot,
    TooLarge,
    BackendMismatch,
    InvalidMetric,
    OutOfDomain,
    ResolutionTooCoarse,
    DegenerateSegment,
    InsufficientCoverage,
    ShortChord,
    PointsTooClose,
    EmptyBody,
    InsufficientPairs,
    InvalidArgument,
    Io,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::AboveRoot: return "AboveRoot";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::BackendMismatch: return "BackendMismatch";
    case ErrorCode::InvalidMetric: return "InvalidMetric";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorCode::DegenerateSegment: return "DegenerateSegment";
    case ErrorCode::InsufficientCoverage: return "InsufficientCoverage";
    case ErrorCode::ShortChord: return "ShortChord";
    case ErrorCode::PointsTooClose: return "PointsTooClose";
    case ErrorCode::EmptyBody: return "EmptyBody";
    case ErrorCode::InsufficientPairs: return "InsufficientPairs";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// ---------------------------------------------------------------------------
// Small dense vector helpers. Dimensions here are tiny (n <= 3 in practice),
// so plain std::vector is enough.

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline Vec sub(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec add(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec scale(std::span<const double> a, double s) {
    Vec r(a.begin(), a.end());
    for (double& v : r) v *= s;
    return r;
}

// a + s * b
inline Vec axpy(std::span<const double> a, double s, std::span<const double> b) {
    Vec r(a.begin(), a.end());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += s * b[i];
    return r;
}

inline double dist2(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Deterministic random streams. mt19937_64 output is fixed by the standard;
// the conversions below are ours so results do not depend on the library's
// distribution implementations.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(seed ^ splitmix64(salt + 0x632be59bd9b4e019ULL));
}

// FNV-1a, used to derive per-object RNG streams from stable identifiers.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    Vec unit_vector(std::size_t n) {
        Vec v(n);
        double len = 0.0;
        while (len < 1e-12) {
            for (double& c : v) c = normal();
            len = norm2(v);
        }
        for (double& c : v) c /= len;
        return v;
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Radical-inverse (Halton) point in [0,1)^n, skipping index 0.
inline Vec halton(std::size_t index, std::size_t n) {
    static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
    Vec p(n);
    for (std::size_t d = 0; d < n; ++d) {
        const int base = primes[d % 10];
        double f = 1.0, r = 0.0;
        std::size_t i = index + 1;
        while (i > 0) {
            f /= base;
            r += f * static_cast<double>(i % base);
            i /= base;
        }
        p[d] = r;
    }
    return p;
}

}  // namespace metricdiff
