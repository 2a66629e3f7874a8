#include "helix/scoring.hpp"

#include "helix/error.hpp"
#include "helix/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace helix {

double entropy(std::span<const double> logits) {
    if (logits.size() < 2) {
        throw bad_input("entropy: need at least 2 logits");
    }
    for (double z : logits) {
        if (!std::isfinite(z)) {
            throw bad_input("entropy: non-finite logit");
        }
    }
    const double m = kern::reduce_max(logits.data(), logits.size());
    const auto mom = kern::softmax_moments(logits.data(), logits.size(), m);
    // H = log(sum) - weighted/sum for shifted logits; shift cancels.
    const double h = std::log(mom.sum_exp) - mom.weighted / mom.sum_exp;
    return h > 0.0 ? h : 0.0;
}

double semantic_confidence(double entropy_nats, size_t vocab_size) {
    if (vocab_size < 2) {
        throw bad_input("semantic_confidence: vocab_size must be >= 2");
    }
    const double s = 1.0 - entropy_nats / std::log(double(vocab_size));
    return std::clamp(s, 0.0, 1.0);
}

double manifold_confidence(double distance, double d_ref) {
    if (!(d_ref > 0.0)) {
        throw bad_input("manifold_confidence: d_ref must be > 0");
    }
    return std::exp(-distance / d_ref);
}

double handover_weight(double temperature, const HandoverParams & p) {
    return 1.0 / (1.0 + std::exp(p.kappa * (temperature - p.t_c)));
}

double aggregate_sd(const std::map<uint32_t, double> & per_layer_s_d, SdAggregation mode) {
    if (per_layer_s_d.empty()) {
        throw bad_input("aggregate_sd: no layers");
    }
    switch (mode) {
        case SdAggregation::mean: {
            double sum = 0.0;
            for (const auto & [id, v] : per_layer_s_d) sum += v;
            return sum / double(per_layer_s_d.size());
        }
        case SdAggregation::min: {
            double best = per_layer_s_d.begin()->second;
            for (const auto & [id, v] : per_layer_s_d) best = std::min(best, v);
            return best;
        }
        case SdAggregation::max: {
            double best = per_layer_s_d.begin()->second;
            for (const auto & [id, v] : per_layer_s_d) best = std::max(best, v);
            return best;
        }
    }
    throw bad_input("aggregate_sd: bad mode");
}

ScoreBreakdown score(std::span<const double> logits,
                     const std::map<uint32_t, std::vector<double>> & hidden_states,
                     const Manifold & manifold,
                     double temperature,
                     const HandoverParams & handover,
                     SdAggregation sd_mode,
                     std::span<const uint32_t> layers) {
    ScoreBreakdown out;
    out.entropy_nats = entropy(logits);
    out.s_e = semantic_confidence(out.entropy_nats, logits.size());

    for (uint32_t layer : layers) {
        const LayerManifold * lm = manifold.find(layer);
        if (!lm) {
            throw bad_input("score: layer " + std::to_string(layer) + " missing from manifold");
        }
        auto it = hidden_states.find(layer);
        if (it == hidden_states.end()) {
            throw bad_input("score: layer " + std::to_string(layer) + " missing from hidden states");
        }
        const double d = mahalanobis(*lm, it->second);
        out.per_layer_distance[layer] = d;
        out.per_layer_s_d[layer] = manifold_confidence(d, lm->d_ref);
    }

    out.s_d = aggregate_sd(out.per_layer_s_d, sd_mode);
    out.beta_t = handover_weight(temperature, handover);
    out.uts = out.beta_t * out.s_e + (1.0 - out.beta_t) * out.s_d;
    return out;
}

} // namespace helix
