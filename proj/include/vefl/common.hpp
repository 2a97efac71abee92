#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vefl {

using Vec = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense row-major matrix, sized for the desk-scale programs in this project.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

inline Vec matvec(const Mat& m, const Vec& x) {
    Vec y(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) s += m(r, c) * x[c];
        y[r] = s;
    }
    return y;
}

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic stream derivation: every consumer hashes its own label and
// indices into the master seed so call order never changes the draws.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = master ^ 0x9e3779b97f4a7c15ull;
    auto mix = [&h](std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        h *= 0xff51afd7ed558ccdull;
        h ^= h >> 33;
    };
    for (char c : label) mix(static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    mix(a);
    mix(b);
    return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::string_view label, std::uint64_t a = 0,
                    std::uint64_t b = 0) {
    return Rng(derive_seed(master, label, a, b));
}

}  // namespace vefl
