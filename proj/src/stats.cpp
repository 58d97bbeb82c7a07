#include "angio/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

namespace angio {

void RunningStats::add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
}

void RunningStats::merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double n = static_cast<double>(n_ + o.n_);
    const double d = o.mean_ - mean_;
    mean_ += d * static_cast<double>(o.n_) / n;
    m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
    n_ += o.n_;
}

double RunningStats::variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
double RunningStats::sd() const { return std::sqrt(variance()); }
double RunningStats::se() const { return n_ > 0 ? sd() / std::sqrt(static_cast<double>(n_)) : 0.0; }

double sample_covariance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("covariance needs paired samples");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / (n - 1.0);
}

double chi_square_critical(int dof, double level) {
    boost::math::chi_squared_distribution<double> law(dof);
    return boost::math::quantile(boost::math::complement(law, level));
}

GofResult chi_square_gof(std::span<const std::size_t> observed, std::span<const double> probs,
                         double level) {
    if (observed.size() != probs.size()) throw std::invalid_argument("chi_square_gof: size mismatch");
    double total_n = 0.0;
    for (auto o : observed) total_n += static_cast<double>(o);
    std::vector<double> obs(observed.begin(), observed.end());
    std::vector<double> p(probs.begin(), probs.end());
    const double psum = std::accumulate(p.begin(), p.end(), 0.0);
    if (psum < 1.0 - 1e-12) {
        obs.push_back(0.0);
        p.push_back(1.0 - psum);
    }
    std::vector<double> o_cells, e_cells;
    double o_acc = 0.0, e_acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        o_acc += obs[i];
        e_acc += p[i] * total_n;
        if (e_acc >= 5.0) {
            o_cells.push_back(o_acc);
            e_cells.push_back(e_acc);
            o_acc = e_acc = 0.0;
        }
    }
    if (e_acc > 0.0 || o_acc > 0.0) {
        if (e_cells.empty()) {
            o_cells.push_back(o_acc);
            e_cells.push_back(e_acc);
        } else {
            o_cells.back() += o_acc;
            e_cells.back() += e_acc;
        }
    }
    GofResult r;
    for (std::size_t i = 0; i < o_cells.size(); ++i) {
        const double d = o_cells[i] - e_cells[i];
        r.statistic += d * d / e_cells[i];
    }
    r.dof = std::max(1, static_cast<int>(o_cells.size()) - 1);
    r.critical = chi_square_critical(r.dof, level);
    r.pass = r.statistic <= r.critical;
    return r;
}

GofResult chi_square_poisson(std::span<const std::size_t> counts, double mean, double level) {
    std::size_t kmax = 0;
    for (auto c : counts) kmax = std::max(kmax, c);
    std::vector<std::size_t> hist(kmax + 1, 0);
    for (auto c : counts) ++hist[c];
    std::vector<double> probs(kmax + 1);
    boost::math::poisson_distribution<double> law(mean);
    for (std::size_t k = 0; k <= kmax; ++k) probs[k] = boost::math::pdf(law, static_cast<double>(k));
    return chi_square_gof(hist, probs, level);
}

KsResult ks_uniform(std::vector<double> samples, double level) {
    if (samples.empty()) throw std::invalid_argument("ks_uniform: no samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double u = std::clamp(samples[i], 0.0, 1.0);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - u, u - static_cast<double>(i) / n});
    }
    // Asymptotic Kolmogorov quantiles.
    const double c = level <= 0.01 ? 1.6276 : (level <= 0.05 ? 1.3581 : 1.2238);
    KsResult r{d, c / std::sqrt(n), false};
    r.pass = r.statistic <= r.critical;
    return r;
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols_slope needs >= 2 points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace angio
