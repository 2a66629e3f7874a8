#pragma once

#include "helix/backend.hpp"
#include "helix/manifold.hpp"
#include "helix/scoring.hpp"
#include "helix/telemetry.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace helix {

enum class PenaltyShape {
    paper_literal,       // penalty = scale * sigmoid(tau - uts); 0.5*scale at the boundary
    boundary_continuous, // penalty = scale * (2*sigmoid(tau - uts) - 1); 0 at the boundary
};

// All steering tunables. The handover weight (kappa, t_c) and the penalty
// magnitude are deliberately separate parameters even though they share a
// symbol upstream of this codebase.
struct SteeringConfig {
    double tau0 = 0.5;          // base threshold, in (0,1]
    double gamma = 0.5;         // threshold relaxation rate, >= 0
    double t_base = 0.7;        // relaxation onset temperature
    double penalty_scale = 4.0; // max logit penalty, >= 0
    HandoverParams handover;    // kappa = 2.0, t_c = 1.5
    SdAggregation sd_aggregation = SdAggregation::mean;
    PenaltyShape penalty_shape = PenaltyShape::boundary_continuous;
    std::vector<uint32_t> steering_layers = {4, 12, 20};

    void validate() const; // throws bad_input on violated invariants
};

// Per-token decision record. The fast path never copies logits: the
// modification is carried as a sparse delta touching at most the argmax.
struct TokenDecision {
    ScoreBreakdown scores;
    double tau_t = 0.0;
    bool steered = false;
    double penalty_applied = 0.0;
    int argmax_index = -1;
    std::map<int, double> modified_logits_delta; // index -> additive delta
};

// tau(T) = tau0 / (1 + gamma * max(0, T - t_base)); non-increasing in T.
double adaptive_threshold(double temperature, const SteeringConfig & cfg);

// Penalty shape as a function of the confidence shortfall x = tau - uts.
// Pure formula; decide/steer_logits gate on uts < tau before applying it.
double steer_penalty(double shortfall, const SteeringConfig & cfg);

// In-place variant of the steer operation: reduces logits[argmax] by the
// penalty when uts < tau and returns the penalty (0 otherwise).
double steer_logits(std::span<double> logits, double uts, double tau, const SteeringConfig & cfg);

// Score + threshold + penalty for one step. No logit copy on the
// not-steered path; beyond scoring the extra work is O(1).
TokenDecision decide(std::span<const double> logits,
                     const std::map<uint32_t, std::vector<double>> & hidden_states,
                     const Manifold & manifold,
                     double temperature,
                     const SteeringConfig & cfg);

struct GenerateOptions {
    uint64_t sampler_seed = 0;
    int max_tokens = 128;
    bool steering_enabled = true; // false skips scoring entirely (baseline arm)
    int top_k = 0;                // 0 = off
    double top_p = 1.0;           // 1 = off
    int stream_id = 0;
};

struct GenerationTrace {
    std::string prompt;
    double temperature = 0.0;
    uint64_t sampler_seed = 0;
    std::vector<int> tokens;
    std::vector<TelemetryRecord> records;
    bool telemetry_degraded = false;
    std::string error; // non-empty when the backend failed mid-stream

    // Tokens rendered as whitespace-separated words ("t17 t394 ...").
    std::string text() const;
    double mean_uts() const;
};

// Autoregressive loop: backend step -> decide -> sample from
// softmax((z + delta)/T) -> telemetry. Deterministic given backend seed and
// sampler seed. Backend failures mid-stream return a partial trace with the
// error marker set; telemetry sink failures set telemetry_degraded and never
// alter the token stream.
GenerationTrace generate(Backend & backend,
                         const Manifold & manifold,
                         const std::string & prompt,
                         double temperature,
                         const SteeringConfig & cfg,
                         const GenerateOptions & opts,
                         TelemetrySink * sink = nullptr);

} // namespace helix
