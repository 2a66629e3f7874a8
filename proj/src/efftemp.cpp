#include "helix/backend.hpp"

#include "helix/error.hpp"
#include "helix/scoring.hpp"

#include <cmath>

namespace helix {

namespace {

double entropy_at_temperature(std::span<const double> logits, double t, std::vector<double> & scratch) {
    scratch.resize(logits.size());
    const double inv = 1.0 / t;
    for (size_t i = 0; i < logits.size(); ++i) {
        scratch[i] = logits[i] * inv;
    }
    return entropy(scratch);
}

} // namespace

double estimate_effective_temperature(std::span<const double> logits,
                                      double noise_std,
                                      double temperature,
                                      int trials,
                                      uint64_t seed) {
    if (trials < 100) {
        throw bad_input("estimate_effective_temperature: trials must be >= 100");
    }
    if (noise_std < 0.0) {
        throw bad_input("estimate_effective_temperature: noise_std must be >= 0");
    }
    if (!(temperature > 0.0)) {
        throw bad_input("estimate_effective_temperature: temperature must be > 0");
    }

    const size_t v = logits.size();
    rng r(seed);
    std::vector<double> noisy(v);
    std::vector<double> scratch(v);

    double target = 0.0;
    for (int t = 0; t < trials; ++t) {
        for (size_t i = 0; i < v; ++i) {
            noisy[i] = logits[i] + noise_std * r.gaussian();
        }
        target += entropy_at_temperature(noisy, temperature, scratch);
    }
    target /= double(trials);

    const double h_max = std::log(double(v));
    if (target >= h_max - 1e-9) {
        throw numerical("estimate_effective_temperature: entropy saturated (flat logits)");
    }

    // Noiseless entropy is monotone increasing in temperature; bisect.
    constexpr double tol = 1e-4;
    double lo = temperature / 1024.0;
    double hi = temperature;
    if (entropy_at_temperature(logits, hi, scratch) < target) {
        double f_hi;
        do {
            lo = hi;
            hi *= 2.0;
            if (hi > temperature * 1e9) {
                throw numerical("estimate_effective_temperature: saturated (cannot bracket target entropy)");
            }
            f_hi = entropy_at_temperature(logits, hi, scratch);
        } while (f_hi < target);
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double h = entropy_at_temperature(logits, mid, scratch);
        if (std::abs(h - target) < tol) {
            return mid;
        }
        if (h < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace helix
