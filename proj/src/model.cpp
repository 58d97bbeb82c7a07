#include "angio/model.hpp"

#include <algorithm>
#include <array>
#include <numbers>
#include <stdexcept>
#include <string>

#include "angio/errors.hpp"

namespace angio {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("parameter constraint violated: ") + what);
}

}  // namespace

void ModelParams::validate() const {
    require(dim >= 1 && dim <= kMaxDim, "1 <= dim <= 3");
    require(std::isfinite(k1) && k1 >= 0.0, "k1 >= 0");
    require(std::isfinite(k2) && k2 >= 0.0, "k2 >= 0");
    require(std::isfinite(sigma) && sigma >= 0.0, "sigma >= 0");
    require(std::isfinite(d1) && d1 >= 0.0, "d1 >= 0");
    require(std::isfinite(d2) && d2 >= 0.0, "d2 >= 0");
    require(std::isfinite(gamma1) && gamma1 > 0.0, "gamma1 > 0");
    require(std::isfinite(q) && q >= 1.0, "q >= 1");
    require(std::isfinite(alpha1) && alpha1 >= 0.0, "alpha1 >= 0");
    require(std::isfinite(beta1) && beta1 >= 0.0, "beta1 >= 0");
    require(std::isfinite(C_R) && C_R > 0.0, "C_R > 0");
    require(std::isfinite(gamma) && gamma >= 0.0, "gamma >= 0");
    require(std::isfinite(C_max) && C_max > 0.0, "C_max > 0");
    require(std::isfinite(v0) && v0 >= 0.0, "v0 >= 0");
    require(std::isfinite(g0) && g0 > 0.0, "g0 > 0");
}

Vec chemo_force(const Vec& grad_c, const ModelParams& p) {
    const double r = norm(grad_c);
    const double f = p.d2 / std::pow(1.0 + p.gamma1 * r, p.q);
    return grad_c * f;
}

double chemo_force_bound(const ModelParams& p) {
    if (p.q <= 1.0) return p.d2 / p.gamma1;
    // d/dr [r (1 + g r)^-q] = 0 at r = 1 / (g (q - 1)).
    const double r = 1.0 / (p.gamma1 * (p.q - 1.0));
    return p.d2 * r / std::pow(1.0 + p.gamma1 * r, p.q);
}

double alpha_rate(double c, const ModelParams& p) {
    if (!(c >= 0.0)) throw std::domain_error("alpha_rate: concentration must be >= 0");
    return p.alpha1 * c / (p.C_R + c);
}

double beta_rate(double c, const ModelParams& p) {
    if (!(c >= 0.0)) throw std::domain_error("beta_rate: concentration must be >= 0");
    return p.beta1 * c / (p.C_R + c);
}

double saturation_h(double r) {
    if (!(r >= 0.0)) throw std::domain_error("saturation_h: argument must be >= 0");
    return r / (1.0 + r);
}

namespace {

constexpr std::array<double, 17> cos_series() {
    std::array<double, 17> c{};
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double term = 1.0;
    for (int k = 0; k < 17; ++k) {
        c[static_cast<std::size_t>(k)] = term;
        term *= -pi2 / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
    }
    return c;
}

constexpr auto kSeries = cos_series();

}  // namespace

const double Kernel::kCosSeries[Kernel::kCosTerms] = {
    kSeries[0],  kSeries[1],  kSeries[2],  kSeries[3],  kSeries[4],  kSeries[5],
    kSeries[6],  kSeries[7],  kSeries[8],  kSeries[9],  kSeries[10], kSeries[11],
    kSeries[12], kSeries[13], kSeries[14], kSeries[15], kSeries[16]};

Kernel::Kernel(int dim, double support_radius, double peak)
    : dim_(dim), radius_(support_radius), peak_(peak), inv_r2_(1.0 / (support_radius * support_radius)) {
    if (dim < 1 || dim > kMaxDim) throw ConfigError("kernel dimension must be 1..3");
    if (!(support_radius > 0.0)) throw ConfigError("kernel support radius must be > 0");
    if (!(peak >= 0.0)) throw ConfigError("kernel peak must be >= 0");
}

Kernel Kernel::with_mass(int dim, double support_radius, double mass) {
    Kernel unit_peak(dim, support_radius, 1.0);
    return Kernel(dim, support_radius, mass / unit_peak.mass());
}

double Kernel::radial(double r) const {
    if (r >= radius_) return 0.0;
    return 0.5 * peak_ * (1.0 + std::cos(std::numbers::pi * r / radius_));
}

double Kernel::mass() const {
    using std::numbers::pi;
    const double R = radius_;
    switch (dim_) {
        case 1: return peak_ * R;
        case 2: return peak_ * R * R * (pi / 2.0 - 2.0 / pi);
        default: return peak_ * 2.0 * pi * R * R * R * (1.0 / 3.0 - 2.0 / (pi * pi));
    }
}

double Kernel::lipschitz() const { return peak_ * std::numbers::pi / (2.0 * radius_); }

double kernel_eval(const Kernel& k, const Vec& x) { return k(x); }

OffspringVelocityLaw::OffspringVelocityLaw(int dim, const Vec& mean_direction, double mean_speed,
                                           double spread, double g0)
    : dim_(dim), mean_speed_(mean_speed), spread_(spread), g0_(g0) {
    if (dim < 1 || dim > kMaxDim) throw ConfigError("offspring law dimension must be 1..3");
    if (!(mean_speed >= 0.0)) throw ConfigError("offspring mean speed must be >= 0");
    if (!(spread >= 0.0)) throw ConfigError("offspring spread must be >= 0");
    if (!(g0 > 0.0)) throw ConfigError("offspring mass g0 must be > 0");
    Vec dir;
    for (int a = 0; a < dim; ++a) dir[static_cast<std::size_t>(a)] = mean_direction[static_cast<std::size_t>(a)];
    const double n = norm(dir);
    if (n == 0.0) throw ConfigError("offspring mean direction must be nonzero");
    mean_ = dir * (mean_speed / n);

    const double k = kTruncationSigmas;
    const double erf_k = std::erf(k / std::numbers::sqrt2);
    switch (dim) {
        case 1: normaliser_ = erf_k; break;
        case 2: normaliser_ = 1.0 - std::exp(-0.5 * k * k); break;
        default:
            normaliser_ = erf_k - std::sqrt(2.0 / std::numbers::pi) * k * std::exp(-0.5 * k * k);
    }
}

double OffspringVelocityLaw::density(const Vec& v) const {
    const double s = component_sd();
    if (s == 0.0) return 0.0;
    const double r2 = dot(v - mean_, v - mean_);
    const double rt = truncation_radius();
    if (r2 > rt * rt) return 0.0;
    const double gauss = std::exp(-0.5 * r2 / (s * s)) /
                         std::pow(2.0 * std::numbers::pi * s * s, 0.5 * dim_);
    return g0_ * gauss / normaliser_;
}

Vec OffspringVelocityLaw::sample(RngStream& rng) const {
    const double s = component_sd();
    if (s == 0.0) return mean_;
    const double rt2 = truncation_radius() * truncation_radius();
    for (;;) {
        Vec e;
        for (int a = 0; a < dim_; ++a) e[static_cast<std::size_t>(a)] = s * rng.normal();
        if (dot(e, e) <= rt2) return mean_ + e;
    }
}

Vec sample_offspring_velocity(const OffspringVelocityLaw& law, RngStream& rng) {
    return law.sample(rng);
}

bool Box::contains(const Vec& x) const {
    for (int a = 0; a < dim; ++a) {
        const auto i = static_cast<std::size_t>(a);
        if (x[i] < lo[i] || x[i] > hi[i]) return false;
    }
    return true;
}

double Box::volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= extent(a);
    return v;
}

double Box::distance(const Vec& x) const {
    double s = 0.0;
    for (int a = 0; a < dim; ++a) {
        const auto i = static_cast<std::size_t>(a);
        const double d = std::max({lo[i] - x[i], 0.0, x[i] - hi[i]});
        s += d * d;
    }
    return std::sqrt(s);
}

TumorIndicator::TumorIndicator(const Box& region, double width) : region_(region), width_(width) {
    if (!(width > 0.0)) throw ConfigError("tumor mollification width must be > 0");
}

double TumorIndicator::operator()(const Vec& x) const {
    double value = 1.0;
    for (int a = 0; a < region_.dim; ++a) {
        const auto i = static_cast<std::size_t>(a);
        const double d = std::max({region_.lo[i] - x[i], 0.0, x[i] - region_.hi[i]});
        if (d >= width_) return 0.0;
        value *= 0.5 * (1.0 + std::cos(std::numbers::pi * d / width_));
    }
    return value;
}

}  // namespace angio
