// Small statistics toolkit shared across the modules: one-pass central
// moments, moment-based normality z-scores, least squares on a scatter,
// and the Kolmogorov-Smirnov distance against a reference CDF.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace rcm {

// One-pass accumulation of central moments up to order 4 (Welford-style
// updates, stable for the sample sizes used here).
struct RunningMoments {
    std::int64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;

    void add(double x) {
        const double n1 = static_cast<double>(n);
        n += 1;
        const double nn = static_cast<double>(n);
        const double delta = x - mean;
        const double dn = delta / nn;
        const double dn2 = dn * dn;
        const double t1 = delta * dn * n1;
        mean += dn;
        m4 += t1 * dn2 * (nn * nn - 3.0 * nn + 3.0) + 6.0 * dn2 * m2 - 4.0 * dn * m3;
        m3 += t1 * dn * (nn - 2.0) - 3.0 * dn * m2;
        m2 += t1;
    }

    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double variance_biased() const { return n > 0 ? m2 / static_cast<double>(n) : 0.0; }
    double stderr_mean() const {
        return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
    }
    double skewness() const {
        if (n < 2 || m2 <= 0.0) return 0.0;
        const double nn = static_cast<double>(n);
        return std::sqrt(nn) * m3 / std::pow(m2, 1.5);
    }
    double excess_kurtosis() const {
        if (n < 2 || m2 <= 0.0) return 0.0;
        const double nn = static_cast<double>(n);
        return nn * m4 / (m2 * m2) - 3.0;
    }
    // Large-sample standard errors under the normal null.
    double skewness_se() const { return n > 0 ? std::sqrt(6.0 / static_cast<double>(n)) : 0.0; }
    double kurtosis_se() const { return n > 0 ? std::sqrt(24.0 / static_cast<double>(n)) : 0.0; }
    // SE of the sample variance without assuming normality.
    double variance_se() const {
        if (n < 2) return 0.0;
        const double nn = static_cast<double>(n);
        double v = m4 / nn - (m2 / nn) * (m2 / nn) * (nn - 3.0) / (nn - 1.0);
        return v > 0.0 ? std::sqrt(v / nn) : 0.0;
    }
};

// Mean and standard error of a binomial frequency.
struct BinomialEstimate {
    std::int64_t count = 0;
    std::int64_t trials = 0;
    double p_hat() const { return trials > 0 ? static_cast<double>(count) / trials : 0.0; }
    double se() const {
        if (trials <= 0) return 0.0;
        double p = p_hat();
        return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(trials));
    }
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::int64_t n = 0;
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("least_squares: size mismatch");
    LineFit fit;
    fit.n = static_cast<std::int64_t>(x.size());
    if (fit.n < 2) throw std::invalid_argument("least_squares: need at least 2 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(fit.n);
    my /= static_cast<double>(fit.n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0) throw std::invalid_argument("least_squares: degenerate abscissa");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

// sup_t |F_emp(t) - F(t)| for a right-continuous reference CDF. The empirical
// CDF jumps at each sample, so the supremum is attained just before or at a
// sample point.
template <class Cdf>
double ks_distance(std::vector<double> samples, Cdf cdf) {
    if (samples.empty()) throw std::invalid_argument("ks_distance: no samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double f = cdf(samples[i]);
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
        d = std::max(d, std::abs(static_cast<double>(i) / n - f));
    }
    return d;
}

// Sample covariance matrix (row-major d x d) of n observations of dimension d,
// stored row-major in samples (n*d values).
inline std::vector<double> covariance_matrix(const std::vector<double>& samples, int d,
                                             std::vector<double>* mean_out = nullptr) {
    if (d <= 0 || samples.size() % static_cast<std::size_t>(d) != 0)
        throw std::invalid_argument("covariance_matrix: bad layout");
    const std::int64_t n = static_cast<std::int64_t>(samples.size()) / d;
    if (n < 2) throw std::invalid_argument("covariance_matrix: need at least 2 samples");
    std::vector<double> mean(d, 0.0);
    for (std::int64_t i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k) mean[k] += samples[static_cast<std::size_t>(i) * d + k];
    for (int k = 0; k < d; ++k) mean[k] /= static_cast<double>(n);
    std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
    for (std::int64_t i = 0; i < n; ++i)
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                cov[static_cast<std::size_t>(a) * d + b] +=
                    (samples[static_cast<std::size_t>(i) * d + a] - mean[a]) *
                    (samples[static_cast<std::size_t>(i) * d + b] - mean[b]);
    for (auto& c : cov) c /= static_cast<double>(n - 1);
    if (mean_out) *mean_out = std::move(mean);
    return cov;
}

} // namespace rcm
