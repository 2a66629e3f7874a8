#pragma once

#include "helix/manifold.hpp"
#include "helix/rng.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace helix {

// One autoregressive step: logits plus the hidden states the scorer reads.
struct StepOutput {
    std::vector<double> logits;
    std::map<uint32_t, std::vector<double>> hidden; // layer_id -> activation
    bool is_end = false;
};

// Token-step provider. One handle per generation stream, single writer.
class Backend {
  public:
    virtual ~Backend() = default;

    // sampled_token is the token drawn from the previous output (pass 0 on
    // the first call). Throws helix::error on unrecoverable failures.
    virtual StepOutput step(int sampled_token, double temperature) = 0;

    virtual uint32_t vocab_size() const = 0;
    virtual std::vector<uint32_t> layer_ids() const = 0;
};

// Seeded toy LM with a planted ground-truth manifold.
//
// The steered layers' hidden states follow a mean-reverting linear-Gaussian
// process around truth_mean whose stationary per-axis scale is
// truth_cov_scale. Sampled tokens feed back through fixed per-token kick
// directions, so hotter (more random) sampling widens those trajectories.
// Logits come from a separate head-state chain (the analogue of the output
// layer, which is not among the steered layers) through the emission
// matrix, keeping the entropy profile stable and tunable.
//
// With probability drift_rate * T per step the regime flips to divergent:
// every steered layer marches outward along a fixed random direction by
// divergence_step per step, so the planted distance grows strictly. The
// head state takes one of two episode shapes, drawn per episode:
//   - dip (probability head_dip_fraction): the head marches toward the
//     origin, the logits flatten and entropy spikes - the incoherent
//     failure mode, visible to the entropy score at any temperature;
//   - lock (otherwise): the head marches outward, the logits sharpen and
//     sampling mode-locks onto the runaway path - the confident
//     hallucination, visible only to the manifold score.
// An episode ends when the sampled token deviates from the current argmax
// (the redirect that a logit penalty makes likelier - this is how steering
// tethers the trajectory) or on a natural reset drawn with probability
// divergence_reset_prob.
struct SyntheticSpec {
    uint64_t seed = 42;
    uint32_t vocab_size = 64;
    uint32_t dim = 8;
    std::vector<uint32_t> layer_ids = {4, 12, 20};
    std::vector<double> truth_mean;    // length dim; derived from seed when empty
    double truth_cov_scale = 1.0;
    double drift_rate = 0.0;           // per-step divergence probability is drift_rate*T
    double divergence_step = 0.0;      // outward step magnitude while divergent

    double reversion = 0.85;           // AR(1) pull toward truth_mean
    double token_kick = 0.0;           // magnitude of the sampled-token state kick
    double emission_scale = 4.0;       // logit std at the truth mean
    double divergence_reset_prob = 0.03;
    double head_noise = 0.12;          // per-axis noise of the emission head chain
    double head_lock_step = 12.0;       // outward head march per divergent step
    double head_dip_fraction = 0.5;    // share of episodes that dip instead of locking
    double head_dip_step = 0.0;        // inward march per step; 0 = |truth_mean| (one-step dip)
    std::vector<double> emission;      // vocab_size x dim row-major; derived when empty

    // Canonical test scenarios. Constants tuned against the planted checks
    // (steering-rate trend, tethering, calibration loop).
    static SyntheticSpec on_manifold(uint64_t seed, uint32_t dim = 8, uint32_t vocab = 64);
    static SyntheticSpec divergence_prone(uint64_t seed, uint32_t dim = 8, uint32_t vocab = 64);
};

class SyntheticBackend : public Backend {
  public:
    explicit SyntheticBackend(const SyntheticSpec & spec);

    StepOutput step(int sampled_token, double temperature) override;
    uint32_t vocab_size() const override { return spec_.vocab_size; }
    std::vector<uint32_t> layer_ids() const override { return spec_.layer_ids; }

    bool divergent() const { return divergent_; }
    const SyntheticSpec & spec() const { return spec_; }

  private:
    void emit_logits(std::vector<double> & out) const;

    SyntheticSpec spec_;
    rng rng_;
    std::vector<std::vector<double>> state_;     // per steered layer
    std::vector<std::vector<double>> direction_; // per steered layer, per episode
    std::vector<double> head_;                   // emission head chain
    std::vector<double> head_direction_;         // head episode direction
    std::vector<double> kick_dirs_;              // vocab_size x dim, unit rows
    bool divergent_ = false;
    double head_step_ = 0.0;                     // current episode's head march
    int last_argmax_ = -1;
    double noise_std_ = 0.0;
};

// One iid draw from the planted stationary Gaussian N(truth_mean,
// truth_cov_scale^2 * I). Used to build manifolds with known ground truth.
std::vector<double> stationary_sample(const SyntheticSpec & spec, rng & r);

// Trace replay. HLXT file format v1 (little-endian):
//   magic "HLXT", u32 version, u32 vocab_size, u32 layer_count,
//   then per record: u32 byte_length of the record body, body =
//     f32[V] logits, per layer (u32 layer_id, u32 d, f32[d] hidden), u8 is_end.
struct TraceWriter {
    explicit TraceWriter(uint32_t vocab_size, uint32_t layer_count);
    void append(const StepOutput & out);
    void write(const std::string & path) const;
    std::vector<uint8_t> bytes() const;

  private:
    std::vector<uint8_t> buf_;
    uint32_t vocab_size_;
    uint32_t layer_count_;
    void * reserved_ = nullptr;
};

// Serves recorded StepOutputs in order; synthesizes is_end on exhaustion.
// A truncated or malformed record raises an error naming its index, after
// all prior records have been served.
class ReplayBackend : public Backend {
  public:
    explicit ReplayBackend(const std::string & path);
    explicit ReplayBackend(std::vector<uint8_t> bytes);

    StepOutput step(int sampled_token, double temperature) override;
    uint32_t vocab_size() const override { return vocab_size_; }
    std::vector<uint32_t> layer_ids() const override { return layer_ids_; }

    size_t records_served() const { return next_index_; }

  private:
    void parse_header();

    std::vector<uint8_t> bytes_;
    size_t pos_ = 0;
    size_t next_index_ = 0;
    uint32_t vocab_size_ = 0;
    uint32_t layer_count_ = 0;
    std::vector<uint32_t> layer_ids_;
    bool exhausted_ = false;
};

// External engine over stdin/stdout, newline-delimited JSON:
//   request  {"op":"step","tokens":[...]}
//   response {"logits":[...],"hidden":{"4":[...],...},"eos":false}
//   error    {"error":"..."}
// One request in flight per stream. The child is spawned via /bin/sh -c.
class ExternalBackend : public Backend {
  public:
    // Spawns the command and probes it with an initial step request.
    explicit ExternalBackend(const std::string & command);
    ~ExternalBackend() override;

    ExternalBackend(const ExternalBackend &) = delete;
    ExternalBackend & operator=(const ExternalBackend &) = delete;

    StepOutput step(int sampled_token, double temperature) override;
    uint32_t vocab_size() const override { return vocab_size_; }
    std::vector<uint32_t> layer_ids() const override { return layer_ids_; }

  private:
    StepOutput request_step();
    std::string read_line();
    void send_line(const std::string & line);
    void shutdown();

    int child_pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string rx_buffer_;
    std::vector<int> tokens_;
    uint32_t vocab_size_ = 0;
    std::vector<uint32_t> layer_ids_;
    StepOutput first_; // probe result, served on the first step() call
    bool first_pending_ = false;
};

// Drives the backend with plain softmax(z/T) sampling (no steering),
// accumulates per-layer moments over the visited hidden states, finalizes
// with the given regularizer and calibrates d_ref on the trailing
// holdout_fraction of the stream. A short burn-in is discarded so samples
// come from the settled trajectory distribution.
Manifold build_manifold_from_backend(Backend & backend,
                                     size_t total_samples,
                                     double build_temperature,
                                     double holdout_fraction,
                                     double lambda,
                                     uint64_t sampler_seed);

// Monte-Carlo estimate of the effective sampling temperature under additive
// logit noise: averages the entropy of softmax((z + eps)/T) over `trials`
// draws of eps ~ N(0, noise_std^2 I), then bisects T_eff so the noiseless
// entropy at T_eff matches (tolerance 1e-4 in entropy). Throws numerical
// error when the logits are too flat to resolve (saturated).
double estimate_effective_temperature(std::span<const double> logits,
                                      double noise_std,
                                      double temperature,
                                      int trials,
                                      uint64_t seed = 1234);

} // namespace helix
