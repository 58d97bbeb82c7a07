#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "angio/measure.hpp"
#include "angio/model.hpp"
#include "angio/vec.hpp"

namespace angio {

/// Uniform cell-centred grid over an axis-aligned box. Node i along an axis
/// sits at origin + (i + 1/2) * spacing; unused axes have extent 1.
struct GridGeometry {
    int dim = 2;
    std::array<int, kMaxDim> shape{1, 1, 1};
    Vec origin;
    double spacing = 1.0;

    /// Grid with cells of the given spacing covering `box` (extents rounded
    /// to a whole number of cells).
    static GridGeometry covering(const Box& box, double spacing);

    std::size_t size() const;
    std::size_t stride(int axis) const;
    std::size_t index(const std::array<int, kMaxDim>& idx) const;
    std::array<int, kMaxDim> multi_index(std::size_t flat) const;
    Vec node(std::size_t flat) const;
    double node_coord(int axis, int i) const {
        return origin[static_cast<std::size_t>(axis)] + (i + 0.5) * spacing;
    }
    double cell_volume() const;
    Box box() const;

    friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// Grid values with a phantom tag so concentration and absorption fields do
/// not mix by accident.
template <class Tag>
struct GridFunction {
    GridGeometry geometry;
    std::vector<double> values;

    GridFunction() = default;
    explicit GridFunction(const GridGeometry& g, double fill = 0.0)
        : geometry(g), values(g.size(), fill) {}

    double integral() const;
};

struct ConcentrationTag;
struct AbsorptionTag;
/// TAF concentration C on the grid.
using ScalarField = GridFunction<ConcentrationTag>;
/// Absorption coefficient eta on the grid (nonnegative).
using AbsorptionField = GridFunction<AbsorptionTag>;

template <class Tag>
double GridFunction<Tag>::integral() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * geometry.cell_volume();
}

/// Counts probe queries that fell outside the interpolation interior and were
/// clamped.
struct ProbeStats {
    std::uint64_t clamped = 0;
};

/// Samples fn at every node.
std::vector<double> sample_nodes(const GridGeometry& g, const std::function<double(const Vec&)>& fn);

/// Adds w * K(node - x) at every node within the kernel support.
void deposit_point(const GridGeometry& g, std::span<double> values, const Vec& x,
                   const Kernel& kernel, double w);

/// Adds dt * weight * |v_i| * K(node - x_i) for every atom of q. Used for the
/// absorption history and for the grid form of the network density.
void deposit_kernel(const GridGeometry& g, std::span<double> values, const EmpiricalMeasure& q,
                    const Kernel& kernel, double dt);

/// eta(x) += dt * sum_i (1/N) K1(x - X_i) |V_i| over the atoms of q.
void accumulate_eta(AbsorptionField& eta, const EmpiricalMeasure& q, const Kernel& k1, double dt);

enum class DiffusionScheme { implicit, explicit_euler };

struct DiffusionOptions {
    DiffusionScheme scheme = DiffusionScheme::implicit;
    /// Largest admissible d1 dt / h^2 for the explicit scheme; 0 means 1/(2 dim).
    double stability_limit = 0.0;
};

/// One split step of dC/dt = k2 delta_A + d1 Lap C - eta C with homogeneous
/// Neumann boundaries: exact reaction factor exp(-eta dt), explicit source,
/// then one diffusion substep. `tumor` holds delta_A at the nodes.
void field_step(ScalarField& c, const AbsorptionField& eta, std::span<const double> tumor,
                const ModelParams& p, double dt, const DiffusionOptions& opts = {});

/// Multilinear interpolant of the node values.
double value_interp(const ScalarField& c, const Vec& x, ProbeStats* stats = nullptr);
double value_interp(const GridGeometry& g, std::span<const double> values, const Vec& x,
                    ProbeStats* stats = nullptr);

/// Gradient of C at x: node gradients by central differences (second-order
/// one-sided at the ends), then multilinear interpolation. Queries outside the
/// node hull are clamped and counted.
Vec grad_interp(const ScalarField& c, const Vec& x, ProbeStats* stats = nullptr);

/// Node gradients of a field, precomputed once per time step for fast probes.
class GradientField {
public:
    explicit GradientField(const ScalarField& c);
    Vec at(const Vec& x, ProbeStats* stats = nullptr) const;

private:
    GridGeometry geometry_;
    std::array<std::vector<double>, kMaxDim> components_;
};

struct NodeViolation {
    std::size_t node = 0;
    Vec position;
    double value = 0.0;
    std::string kind;  ///< "negative" or "upper"
};

struct FieldBoundsReport {
    bool ok = true;
    double min = 0.0;
    double max = 0.0;
    double bound = 0.0;         ///< C_max + k2 ||delta_A|| elapsed
    bool strict_holds = true;   ///< max <= C_max as well
    double grad_sup = 0.0;      ///< max finite-difference |grad C|
    double hessian_sup = 0.0;   ///< max finite-difference |d_i d_j C|
    std::optional<NodeViolation> violation;
};

/// Checks 0 <= C <= C_max + k2 * tumor_sup * elapsed at every node.
FieldBoundsReport field_bounds_check(const ScalarField& c, const ModelParams& p, double tumor_sup,
                                     double elapsed);

}  // namespace angio
