#include "angio/dictionary.hpp"

#include <cmath>
#include <numbers>

#include "angio/errors.hpp"

namespace angio {

namespace {

// All multi-indices of length `len` with the given total degree, ascending
// lexicographically.
void degree_indices(int len, int degree, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == len - 1) {
        cur.push_back(degree);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (int first = 0; first <= degree; ++first) {
        cur.push_back(first);
        degree_indices(len, degree - first, cur, out);
        cur.pop_back();
    }
}

}  // namespace

TestFunctionDictionary::TestFunctionDictionary(int dim, const Box& box, double v_max, std::size_t size)
    : dim_(dim), box_(box), v_max_(v_max) {
    if (dim < 1 || dim > kMaxDim) throw ConfigError("dictionary dimension must be 1..3");
    if (!(v_max > 0.0)) throw ConfigError("dictionary v_max must be > 0");
    if (size < 1) throw ConfigError("dictionary size must be >= 1");
    const int len = 2 * dim;
    for (int degree = 0; entries_.size() < size; ++degree) {
        std::vector<std::vector<int>> idx;
        std::vector<int> cur;
        degree_indices(len, degree, cur, idx);
        for (const auto& mi : idx) {
            if (entries_.size() == size) break;
            Entry e;
            for (int a = 0; a < dim; ++a) {
                e.n[static_cast<std::size_t>(a)] = mi[static_cast<std::size_t>(a)];
                e.m[static_cast<std::size_t>(a)] = mi[static_cast<std::size_t>(dim + a)];
            }
            entries_.push_back(e);
        }
    }
}

double TestFunctionDictionary::x_part(std::size_t k, const Vec& x) const {
    const Entry& e = entries_[k];
    double r = 1.0;
    for (int a = 0; a < dim_; ++a) {
        const auto i = static_cast<std::size_t>(a);
        if (e.n[i] == 0) continue;
        const double xh = (x[i] - box_.lo[i]) / box_.extent(a);
        r *= std::cos(std::numbers::pi * e.n[i] * xh);
    }
    return r;
}

double TestFunctionDictionary::v_part(std::size_t k, const Vec& v) const {
    const Entry& e = entries_[k];
    double r = 1.0;
    for (int a = 0; a < dim_; ++a) {
        const auto i = static_cast<std::size_t>(a);
        if (e.m[i] == 0) continue;
        r *= std::cos(std::numbers::pi * e.m[i] * v[i] / v_max_);
    }
    return r;
}

Vec TestFunctionDictionary::grad_v(std::size_t k, const Vec& x, const Vec& v) const {
    const Entry& e = entries_[k];
    const double xp = x_part(k, x);
    std::array<double, kMaxDim> c{1, 1, 1}, s{0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
        const auto i = static_cast<std::size_t>(a);
        const double w = std::numbers::pi * e.m[i] / v_max_;
        c[i] = std::cos(w * v[i]);
        s[i] = -w * std::sin(w * v[i]);
    }
    Vec g;
    for (int a = 0; a < dim_; ++a) {
        double r = xp * s[static_cast<std::size_t>(a)];
        for (int b = 0; b < dim_; ++b)
            if (b != a) r *= c[static_cast<std::size_t>(b)];
        g[static_cast<std::size_t>(a)] = r;
    }
    return g;
}

std::size_t TestFunctionDictionary::first_mixed() const {
    for (std::size_t k = 0; k < entries_.size(); ++k) {
        bool has_n = false, has_m = false;
        for (int a = 0; a < dim_; ++a) {
            has_n = has_n || entries_[k].n[static_cast<std::size_t>(a)] != 0;
            has_m = has_m || entries_[k].m[static_cast<std::size_t>(a)] != 0;
        }
        if (has_n && has_m) return k;
    }
    throw ConfigError("dictionary has no entry depending on both x and v; increase its size");
}

std::vector<double> offspring_square_moments(const TestFunctionDictionary& dict,
                                             const OffspringVelocityLaw& law) {
    std::vector<double> out(dict.size(), 0.0);
    const int dim = law.dim();
    if (law.component_sd() == 0.0) {
        for (std::size_t k = 0; k < dict.size(); ++k) {
            const double vp = dict.v_part(k, law.mean());
            out[k] = law.g0() * vp * vp;
        }
        return out;
    }
    const int n = dim == 1 ? 2000 : (dim == 2 ? 160 : 48);
    const double R = law.truncation_radius();
    const double h = 2.0 * R / n;
    const Vec c = law.mean();
    std::vector<double> sums(dict.size(), 0.0);
    double mass = 0.0;
    const int n2 = dim >= 2 ? n : 1, n3 = dim >= 3 ? n : 1;
    for (int k3 = 0; k3 < n3; ++k3)
        for (int k2 = 0; k2 < n2; ++k2)
            for (int k1 = 0; k1 < n; ++k1) {
                Vec v = c;
                v[0] += -R + (k1 + 0.5) * h;
                if (dim >= 2) v[1] += -R + (k2 + 0.5) * h;
                if (dim >= 3) v[2] += -R + (k3 + 0.5) * h;
                const double g = law.density(v);
                if (g == 0.0) continue;
                mass += g;
                for (std::size_t k = 0; k < dict.size(); ++k) {
                    const double vp = dict.v_part(k, v);
                    sums[k] += g * vp * vp;
                }
            }
    for (std::size_t k = 0; k < dict.size(); ++k) out[k] = law.g0() * sums[k] / mass;
    return out;
}

}  // namespace angio
