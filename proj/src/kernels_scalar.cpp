#include "helix/kernels.hpp"

#include <cmath>

namespace helix::kern::scalar {

double reduce_max(const double * x, size_t n) {
    double m = x[0];
    for (size_t i = 1; i < n; ++i) {
        if (x[i] > m) m = x[i];
    }
    return m;
}

double dot(const double * x, const double * y, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        acc += x[i] * y[i];
    }
    return acc;
}

void axpy(double a, const double * x, double * y, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        y[i] += a * x[i];
    }
}

double sum_sq(const double * x, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        acc += x[i] * x[i];
    }
    return acc;
}

softmax_moments_t softmax_moments(const double * x, size_t n, double shift) {
    double sum_exp = 0.0;
    double weighted = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double s = x[i] - shift;
        const double e = std::exp(s);
        sum_exp += e;
        weighted += s * e;
    }
    return {sum_exp, weighted};
}

double exp_scaled(const double * x, double * out, size_t n, double shift, double inv_t) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double e = std::exp((x[i] - shift) * inv_t);
        out[i] = e;
        sum += e;
    }
    return sum;
}

} // namespace helix::kern::scalar
