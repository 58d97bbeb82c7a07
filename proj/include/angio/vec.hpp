#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace angio {

inline constexpr int kMaxDim = 3;

/// Fixed-capacity spatial vector. Components beyond the active dimension are
/// kept at zero so norms and dot products need no dimension argument.
struct Vec {
    std::array<double, kMaxDim> c{0.0, 0.0, 0.0};

    constexpr double& operator[](std::size_t i) { return c[i]; }
    constexpr double operator[](std::size_t i) const { return c[i]; }

    constexpr Vec& operator+=(const Vec& o) {
        for (std::size_t i = 0; i < kMaxDim; ++i) c[i] += o.c[i];
        return *this;
    }
    constexpr Vec& operator-=(const Vec& o) {
        for (std::size_t i = 0; i < kMaxDim; ++i) c[i] -= o.c[i];
        return *this;
    }
    constexpr Vec& operator*=(double s) {
        for (auto& x : c) x *= s;
        return *this;
    }

    friend constexpr bool operator==(const Vec&, const Vec&) = default;
};

constexpr Vec operator+(Vec a, const Vec& b) { return a += b; }
constexpr Vec operator-(Vec a, const Vec& b) { return a -= b; }
constexpr Vec operator*(Vec a, double s) { return a *= s; }
constexpr Vec operator*(double s, Vec a) { return a *= s; }
constexpr Vec operator-(Vec a) { return a *= -1.0; }

constexpr double dot(const Vec& a, const Vec& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(const Vec& a) {
    return std::isfinite(a[0]) && std::isfinite(a[1]) && std::isfinite(a[2]);
}

/// Unit vector along axis `axis`.
constexpr Vec unit(int axis) {
    Vec e;
    e[static_cast<std::size_t>(axis)] = 1.0;
    return e;
}

}  // namespace angio
