#pragma once

#include <vector>

#include "angio/vec.hpp"

namespace angio {

struct Atom {
    Vec x;
    Vec v;
};

/// Weighted point cloud in (x, v); every atom carries `weight` (1/N).
struct EmpiricalMeasure {
    int dim = 2;
    double weight = 1.0;
    std::vector<Atom> atoms;

    double total_mass() const { return weight * static_cast<double>(atoms.size()); }
};

}  // namespace angio
