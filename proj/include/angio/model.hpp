#pragma once

#include "angio/rng.hpp"
#include "angio/vec.hpp"

namespace angio {

/// Constants and coefficient parameters of the angiogenesis model
/// (nondimensional units; see README for the canonical scaling).
struct ModelParams {
    int dim = 2;          ///< spatial dimension, 1..3
    double k1 = 1.0;      ///< friction rate
    double k2 = 1.0;      ///< TAF source strength
    double sigma = 0.5;   ///< velocity noise amplitude
    double d1 = 0.1;      ///< TAF diffusivity
    double d2 = 1.0;      ///< chemotaxis strength
    double gamma1 = 1.0;  ///< chemotaxis saturation scale
    double q = 1.0;       ///< saturation exponent
    double alpha1 = 0.5;  ///< max tip-branching rate
    double beta1 = 0.05;  ///< max vessel-branching rate
    double C_R = 0.5;     ///< reference concentration of the branching rates
    double gamma = 0.5;   ///< anastomosis rate constant
    double C_max = 1.0;   ///< upper bound of the initial TAF field
    double v0 = 0.5;      ///< mean offspring speed
    double g0 = 1.0;      ///< total mass of the offspring velocity density

    /// Throws ConfigError naming the first violated constraint.
    void validate() const;
};

/// f(|g|) g with f(r) = d2 / (1 + gamma1 r)^q.
Vec chemo_force(const Vec& grad_c, const ModelParams& p);

/// sup_r d2 r / (1 + gamma1 r)^q, the bound on |chemo_force|.
double chemo_force_bound(const ModelParams& p);

/// alpha(c) = alpha1 c / (C_R + c). Throws std::domain_error for c < 0.
double alpha_rate(double c, const ModelParams& p);
/// beta(c) = beta1 c / (C_R + c). Throws std::domain_error for c < 0.
double beta_rate(double c, const ModelParams& p);
/// h(r) = r / (1 + r). Throws std::domain_error for r < 0.
double saturation_h(double r);

/// Radial cosine bump K(x) = peak (1 + cos(pi |x| / R)) / 2 on |x| <= R.
class Kernel {
public:
    Kernel(int dim, double support_radius, double peak);

    /// Kernel scaled so that its integral over R^dim equals `mass`.
    static Kernel with_mass(int dim, double support_radius, double mass);

    double operator()(const Vec& x) const { return radial_sq(dot(x, x)); }
    double radial(double r) const;
    /// Kernel value from the squared distance, without sqrt or cos: the
    /// profile is evaluated as a degree-16 polynomial in (r / R)^2 (error
    /// below 1e-15 relative to the peak).
    double radial_sq(double r2) const {
        if (r2 >= radius_ * radius_) return 0.0;
        const double u = r2 * inv_r2_;
        // cos(pi sqrt(u)) = sum_k (-1)^k pi^(2k) u^k / (2k)!
        double acc = kCosSeries[kCosTerms - 1];
        for (int k = kCosTerms - 2; k >= 0; --k) acc = acc * u + kCosSeries[k];
        return 0.5 * peak_ * (1.0 + acc);
    }

    int dim() const { return dim_; }
    double support_radius() const { return radius_; }
    double peak() const { return peak_; }
    /// Exact integral of the kernel over R^dim.
    double mass() const;
    /// max |K'| = peak * pi / (2R), attained at r = R/2.
    double lipschitz() const;

private:
    static constexpr int kCosTerms = 17;
    static const double kCosSeries[kCosTerms];

    int dim_;
    double radius_;
    double peak_;
    double inv_r2_;
};

double kernel_eval(const Kernel& k, const Vec& x);

/// Offspring velocity density G_{v0}: an isotropic Gaussian with per-component
/// standard deviation spread * v0 centred at mean_direction * v0, truncated to
/// the ball of radius 3 * spread * v0 around its centre and scaled to total
/// mass g0. The centred symmetric truncation keeps the mean vector at
/// mean_direction * v0.
class OffspringVelocityLaw {
public:
    OffspringVelocityLaw(int dim, const Vec& mean_direction, double mean_speed, double spread,
                         double g0);

    static constexpr double kTruncationSigmas = 3.0;

    /// Density value (integrates to g0). Zero for the degenerate spread = 0 law.
    double density(const Vec& v) const;
    Vec sample(RngStream& rng) const;

    int dim() const { return dim_; }
    Vec mean() const { return mean_; }
    double mean_speed() const { return mean_speed_; }
    double spread() const { return spread_; }
    double g0() const { return g0_; }
    /// Component standard deviation of the untruncated Gaussian.
    double component_sd() const { return spread_ * mean_speed_; }
    /// Radius of the support ball around the mean.
    double truncation_radius() const { return kTruncationSigmas * component_sd(); }
    /// Speed cap: every sample satisfies |v| <= support_radius().
    double support_radius() const { return mean_speed_ + truncation_radius(); }

private:
    int dim_;
    Vec mean_;
    double mean_speed_;
    double spread_;
    double g0_;
    double normaliser_ = 0.0;
};

Vec sample_offspring_velocity(const OffspringVelocityLaw& law, RngStream& rng);

/// Axis-aligned box [lo, hi] in the first `dim` coordinates.
struct Box {
    int dim = 2;
    Vec lo;
    Vec hi;

    bool contains(const Vec& x) const;
    double extent(int axis) const { return hi[static_cast<std::size_t>(axis)] - lo[static_cast<std::size_t>(axis)]; }
    double volume() const;
    /// Euclidean distance from x to the box (zero inside).
    double distance(const Vec& x) const;
};

/// Mollified indicator of the tumoral box: 1 on the box, decaying to 0 over
/// `width` outside each face with a C^1 cosine ramp; product over axes.
class TumorIndicator {
public:
    TumorIndicator(const Box& region, double width);

    double operator()(const Vec& x) const;
    double sup_norm() const { return 1.0; }
    const Box& region() const { return region_; }
    double width() const { return width_; }

private:
    Box region_;
    double width_;
};

}  // namespace angio
