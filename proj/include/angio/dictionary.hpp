#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "angio/model.hpp"
#include "angio/vec.hpp"

namespace angio {

/// Test functions phi_k(x, v) = prod_a cos(pi n_a xh_a) * prod_a cos(pi m_a vh_a)
/// with xh = (x - lo) / L over the box and vh = v / v_max. Frequencies are
/// enumerated by total degree, then lexicographically in (n, m); phi_1 = 1.
class TestFunctionDictionary {
public:
    struct Entry {
        std::array<int, kMaxDim> n{0, 0, 0};
        std::array<int, kMaxDim> m{0, 0, 0};
    };

    TestFunctionDictionary(int dim, const Box& box, double v_max, std::size_t size = 16);

    std::size_t size() const { return entries_.size(); }
    int dim() const { return dim_; }
    double v_max() const { return v_max_; }
    const Box& box() const { return box_; }
    const Entry& entry(std::size_t k) const { return entries_[k]; }

    double x_part(std::size_t k, const Vec& x) const;
    double v_part(std::size_t k, const Vec& v) const;
    double value(std::size_t k, const Vec& x, const Vec& v) const { return x_part(k, x) * v_part(k, v); }
    Vec grad_v(std::size_t k, const Vec& x, const Vec& v) const;

    /// Index of the first entry depending on both x and v.
    std::size_t first_mixed() const;

private:
    int dim_;
    Box box_;
    double v_max_;
    std::vector<Entry> entries_;
};

/// int G(v) v_part_k(v)^2 dv for every entry, by midpoint quadrature over the
/// support of the law, normalised so the weights integrate to g0 exactly.
std::vector<double> offspring_square_moments(const TestFunctionDictionary& dict,
                                             const OffspringVelocityLaw& law);

}  // namespace angio
