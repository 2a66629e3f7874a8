#pragma once

// Test-only oracles, deliberately independent of the library's compute
// paths: long-double accumulation, explicit matrix inverses, two-pass
// moments. Used to freeze expected values and to cross-check the
// implementation at tight tolerances.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace oracle {

inline double rel_err(double actual, double expected) {
    const double denom = std::max(std::abs(expected), 1e-300);
    return std::abs(actual - expected) / denom;
}

// Entropy in nats via long-double two-pass softmax.
inline double entropy_ld(std::span<const double> logits) {
    long double m = logits[0];
    for (double z : logits) {
        if ((long double)z > m) m = z;
    }
    long double sum = 0.0L;
    for (double z : logits) {
        sum += expl((long double)z - m);
    }
    long double h = 0.0L;
    for (double z : logits) {
        const long double p = expl((long double)z - m) / sum;
        if (p > 0.0L) {
            h -= p * logl(p);
        }
    }
    return double(h);
}

inline double sigmoid_ld(double x) {
    return double(1.0L / (1.0L + expl((long double)(-x))));
}

inline double handover_ld(double t, double kappa, double t_c) {
    return double(1.0L / (1.0L + expl((long double)(kappa) * ((long double)t - (long double)t_c))));
}

// Dense two-pass mean and covariance (unbiased), long-double accumulation.
struct two_pass_moments {
    std::vector<double> mean;       // d
    std::vector<double> cov;        // d*d row-major
};

inline two_pass_moments two_pass(const std::vector<std::vector<double>> & samples) {
    const size_t n = samples.size();
    const size_t d = samples.front().size();
    two_pass_moments out;
    out.mean.assign(d, 0.0);
    out.cov.assign(d * d, 0.0);

    std::vector<long double> mean(d, 0.0L);
    for (const auto & s : samples) {
        for (size_t i = 0; i < d; ++i) mean[i] += s[i];
    }
    for (size_t i = 0; i < d; ++i) {
        mean[i] /= (long double)n;
        out.mean[i] = double(mean[i]);
    }
    std::vector<long double> cov(d * d, 0.0L);
    for (const auto & s : samples) {
        for (size_t i = 0; i < d; ++i) {
            const long double di = s[i] - mean[i];
            for (size_t j = 0; j < d; ++j) {
                cov[i * d + j] += di * ((long double)s[j] - mean[j]);
            }
        }
    }
    for (size_t k = 0; k < d * d; ++k) {
        out.cov[k] = double(cov[k] / (long double)(n - 1));
    }
    return out;
}

// Gauss-Jordan inverse with partial pivoting, long double.
inline std::vector<double> invert(const std::vector<double> & a_in, size_t d) {
    std::vector<long double> a(d * 2 * d, 0.0L);
    for (size_t i = 0; i < d; ++i) {
        for (size_t j = 0; j < d; ++j) {
            a[i * 2 * d + j] = a_in[i * d + j];
        }
        a[i * 2 * d + d + i] = 1.0L;
    }
    for (size_t col = 0; col < d; ++col) {
        size_t pivot = col;
        for (size_t r = col + 1; r < d; ++r) {
            if (fabsl(a[r * 2 * d + col]) > fabsl(a[pivot * 2 * d + col])) pivot = r;
        }
        if (a[pivot * 2 * d + col] == 0.0L) {
            throw std::runtime_error("oracle invert: singular");
        }
        if (pivot != col) {
            for (size_t k = 0; k < 2 * d; ++k) std::swap(a[pivot * 2 * d + k], a[col * 2 * d + k]);
        }
        const long double piv = a[col * 2 * d + col];
        for (size_t k = 0; k < 2 * d; ++k) a[col * 2 * d + k] /= piv;
        for (size_t r = 0; r < d; ++r) {
            if (r == col) continue;
            const long double f = a[r * 2 * d + col];
            if (f == 0.0L) continue;
            for (size_t k = 0; k < 2 * d; ++k) a[r * 2 * d + k] -= f * a[col * 2 * d + k];
        }
    }
    std::vector<double> inv(d * d);
    for (size_t i = 0; i < d; ++i) {
        for (size_t j = 0; j < d; ++j) {
            inv[i * d + j] = double(a[i * 2 * d + d + j]);
        }
    }
    return inv;
}

// Mahalanobis via the explicit inverse: sqrt((h-mu)' inv (h-mu)).
inline double mahalanobis_inverse(const std::vector<double> & cov_dense, size_t d,
                                  const std::vector<double> & mu,
                                  const std::vector<double> & h) {
    const auto inv = invert(cov_dense, d);
    std::vector<long double> diff(d);
    for (size_t i = 0; i < d; ++i) diff[i] = (long double)h[i] - mu[i];
    long double q = 0.0L;
    for (size_t i = 0; i < d; ++i) {
        for (size_t j = 0; j < d; ++j) {
            q += diff[i] * (long double)inv[i * d + j] * diff[j];
        }
    }
    return double(sqrtl(q));
}

// Random SPD matrix: A = B*B' + eps*I with B gaussian.
template <typename Rng>
std::vector<double> random_spd(size_t d, Rng & rng, double eps = 0.5) {
    std::vector<double> b(d * d);
    for (auto & x : b) x = rng.gaussian();
    std::vector<double> a(d * d, 0.0);
    for (size_t i = 0; i < d; ++i) {
        for (size_t j = 0; j < d; ++j) {
            long double s = 0.0L;
            for (size_t k = 0; k < d; ++k) s += (long double)b[i * d + k] * b[j * d + k];
            a[i * d + j] = double(s);
        }
        a[i * d + i] += eps;
    }
    return a;
}

} // namespace oracle
