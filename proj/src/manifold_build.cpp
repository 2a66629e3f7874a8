#include "helix/backend.hpp"

#include "helix/error.hpp"
#include "helix/kernels.hpp"

#include <cmath>

namespace helix {

namespace {

int plain_sample(std::span<const double> logits, double temperature, rng & r,
                 std::vector<double> & scratch) {
    const double m = kern::reduce_max(logits.data(), logits.size());
    const double sum = kern::exp_scaled(logits.data(), scratch.data(), logits.size(), m,
                                        temperature > 0 ? 1.0 / temperature : 1.0);
    const double u = r.uniform() * sum;
    double acc = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        acc += scratch[i];
        if (u < acc) {
            return int(i);
        }
    }
    return int(logits.size() - 1);
}

} // namespace

Manifold build_manifold_from_backend(Backend & backend,
                                     size_t total_samples,
                                     double build_temperature,
                                     double holdout_fraction,
                                     double lambda,
                                     uint64_t sampler_seed) {
    if (total_samples < 4) {
        throw bad_input("build manifold: need at least 4 samples");
    }
    if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0) {
        throw bad_input("build manifold: holdout fraction must be in (0,1)");
    }

    const auto layers = backend.layer_ids();
    const size_t holdout = std::max<size_t>(1, size_t(std::llround(holdout_fraction * double(total_samples))));
    const size_t fit = total_samples - holdout;
    if (fit < 2) {
        throw bad_input("build manifold: holdout leaves fewer than 2 fit samples");
    }

    constexpr size_t k_burn_in = 64;
    rng sampler(sampler_seed);
    std::vector<double> scratch(backend.vocab_size());
    std::map<uint32_t, RunningStats> stats;
    std::map<uint32_t, std::vector<std::vector<double>>> held;

    int token = 0;
    for (size_t step = 0; step < k_burn_in + total_samples; ++step) {
        StepOutput out = backend.step(token, build_temperature);
        if (out.is_end) {
            throw bad_input("build manifold: backend ended after " + std::to_string(step) +
                            " steps, need " + std::to_string(k_burn_in + total_samples));
        }
        token = plain_sample(out.logits, build_temperature, sampler, scratch);
        if (step < k_burn_in) {
            continue;
        }
        const bool is_holdout = step >= k_burn_in + fit;
        for (uint32_t layer : layers) {
            auto it = out.hidden.find(layer);
            if (it == out.hidden.end()) {
                throw bad_input("build manifold: backend omitted layer " + std::to_string(layer));
            }
            if (is_holdout) {
                held[layer].push_back(it->second);
            } else {
                stats[layer].accumulate(it->second);
            }
        }
    }

    Manifold m;
    m.meta.build_temperature = build_temperature;
    for (uint32_t layer : layers) {
        auto lm = finalize(stats.at(layer), layer, lambda);
        calibrate_dref(lm, held.at(layer));
        m.add(std::move(lm));
    }
    return m;
}

} // namespace helix
