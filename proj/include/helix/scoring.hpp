#pragma once

#include "helix/manifold.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace helix {

// Sigmoid handover between the entropy score and the manifold score.
struct HandoverParams {
    double kappa = 2.0; // steepness
    double t_c = 1.5;   // crossover temperature
};

enum class SdAggregation {
    mean,
    min,
    max,
};

// Everything the scorer derives for one token.
struct ScoreBreakdown {
    double entropy_nats = 0.0;
    double s_e = 0.0;                         // 1 - H/ln(V), clamped to [0,1]
    std::map<uint32_t, double> per_layer_distance;
    std::map<uint32_t, double> per_layer_s_d; // exp(-D/d_ref) per layer
    double s_d = 0.0;                         // aggregated
    double beta_t = 0.0;
    double uts = 0.0;                         // beta*s_e + (1-beta)*s_d
};

// Shannon entropy in nats of softmax(logits) at unit temperature.
// Pre-temperature by contract: sampling may rescale by T, the score never does.
double entropy(std::span<const double> logits);

// 1 - H/ln(V), clamped into [0,1].
double semantic_confidence(double entropy_nats, size_t vocab_size);

// exp(-distance/d_ref)
double manifold_confidence(double distance, double d_ref);

// beta(T) = 1 / (1 + exp(kappa * (T - t_c))); strictly decreasing in T.
double handover_weight(double temperature, const HandoverParams & p);

double aggregate_sd(const std::map<uint32_t, double> & per_layer_s_d, SdAggregation mode);

// Full per-token score. Every layer id in `layers` must be present in both
// the manifold and hidden_states.
ScoreBreakdown score(std::span<const double> logits,
                     const std::map<uint32_t, std::vector<double>> & hidden_states,
                     const Manifold & manifold,
                     double temperature,
                     const HandoverParams & handover,
                     SdAggregation sd_mode,
                     std::span<const uint32_t> layers);

} // namespace helix
