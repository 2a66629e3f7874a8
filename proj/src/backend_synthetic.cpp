#include "helix/backend.hpp"

#include "helix/error.hpp"
#include "helix/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace helix {

namespace {

// Distinct sub-streams so that emission weights, kick directions and the
// step-by-step dynamics draw from independent deterministic sequences.
constexpr uint64_t k_stream_mean = 0x11;
constexpr uint64_t k_stream_emission = 0x22;
constexpr uint64_t k_stream_kicks = 0x33;
constexpr uint64_t k_stream_dynamics = 0x44;

std::vector<double> derive_truth_mean(const SyntheticSpec & spec) {
    if (!spec.truth_mean.empty()) {
        return spec.truth_mean;
    }
    // Random direction with norm sqrt(d), so the emission scale knob maps
    // directly to the logit spread at the mean.
    rng r(seed_mix(spec.seed, k_stream_mean));
    std::vector<double> mu(spec.dim);
    r.fill_gaussian(mu);
    const double norm = std::sqrt(kern::sum_sq(mu.data(), mu.size()));
    const double target = std::sqrt(double(spec.dim));
    for (auto & x : mu) {
        x *= target / (norm > 0 ? norm : 1.0);
    }
    return mu;
}

std::vector<double> derive_emission(const SyntheticSpec & spec, const std::vector<double> & mu) {
    if (!spec.emission.empty()) {
        return spec.emission;
    }
    // A raw Gaussian draw occasionally lands a near-tie between the top two
    // logits at the truth mean, which makes the toy LM switch modes
    // constantly and wrecks its entropy profile. Redraw (deterministically)
    // until the mean pattern has a stable mode and mid-band entropy.
    const double scale = spec.emission_scale / std::sqrt(double(spec.dim));
    std::vector<double> e(size_t(spec.vocab_size) * spec.dim);
    std::vector<double> z(spec.vocab_size);
    for (uint64_t attempt = 0; attempt < 512; ++attempt) {
        rng r(seed_mix(spec.seed, k_stream_emission + attempt * 0x1000));
        r.fill_gaussian(e, 0.0, scale);
        for (uint32_t v = 0; v < spec.vocab_size; ++v) {
            z[v] = kern::dot(e.data() + size_t(v) * spec.dim, mu.data(), spec.dim);
        }
        double top1 = z[0], top2 = -1e300;
        for (uint32_t v = 1; v < spec.vocab_size; ++v) {
            if (z[v] > top1) {
                top2 = top1;
                top1 = z[v];
            } else if (z[v] > top2) {
                top2 = z[v];
            }
        }
        const double gap = top1 - top2;
        const double h = entropy(z) / std::log(double(spec.vocab_size));
        if (gap >= 0.33 * spec.emission_scale && h >= 0.22 && h <= 0.40) {
            return e;
        }
    }
    throw numerical("synthetic backend: no acceptable emission draw in 512 attempts");
}

} // namespace

SyntheticSpec SyntheticSpec::on_manifold(uint64_t seed, uint32_t dim, uint32_t vocab) {
    SyntheticSpec s;
    s.seed = seed;
    s.dim = dim;
    s.vocab_size = vocab;
    s.drift_rate = 0.0;
    s.divergence_step = 0.0;
    s.token_kick = 0.35;
    return s;
}

SyntheticSpec SyntheticSpec::divergence_prone(uint64_t seed, uint32_t dim, uint32_t vocab) {
    SyntheticSpec s;
    s.seed = seed;
    s.dim = dim;
    s.vocab_size = vocab;
    s.drift_rate = 0.003;        // per-step entry probability is this times T
    s.divergence_step = 6.0;
    s.divergence_reset_prob = 0.12;
    s.token_kick = 0.35;
    return s;
}

SyntheticBackend::SyntheticBackend(const SyntheticSpec & spec)
    : spec_(spec), rng_(seed_mix(spec.seed, k_stream_dynamics)) {
    if (spec_.vocab_size < 2 || spec_.dim < 2) {
        throw bad_input("synthetic backend: vocab_size and dim must be >= 2");
    }
    if (spec_.layer_ids.empty()) {
        throw bad_input("synthetic backend: need at least one layer id");
    }
    if (!(spec_.truth_cov_scale > 0.0)) {
        throw bad_input("synthetic backend: truth_cov_scale must be > 0");
    }
    if (spec_.reversion < 0.0 || spec_.reversion >= 1.0) {
        throw bad_input("synthetic backend: reversion must be in [0,1)");
    }
    spec_.truth_mean = derive_truth_mean(spec_);
    if (spec_.truth_mean.size() != spec_.dim) {
        throw bad_input("synthetic backend: truth_mean dimension mismatch");
    }
    spec_.emission = derive_emission(spec_);
    if (spec_.emission.size() != size_t(spec_.vocab_size) * spec_.dim) {
        throw bad_input("synthetic backend: emission matrix dimension mismatch");
    }

    // Unit kick direction per token.
    rng kick_rng(seed_mix(spec_.seed, k_stream_kicks));
    kick_dirs_.resize(size_t(spec_.vocab_size) * spec_.dim);
    for (uint32_t v = 0; v < spec_.vocab_size; ++v) {
        double * row = kick_dirs_.data() + size_t(v) * spec_.dim;
        kick_rng.fill_gaussian({row, spec_.dim});
        const double norm = std::sqrt(kern::sum_sq(row, spec_.dim));
        for (uint32_t i = 0; i < spec_.dim; ++i) {
            row[i] /= (norm > 0 ? norm : 1.0);
        }
    }

    state_.assign(spec_.layer_ids.size(), spec_.truth_mean);
    direction_.assign(spec_.layer_ids.size(), std::vector<double>(spec_.dim, 0.0));
    head_ = spec_.truth_mean;
    head_direction_.assign(spec_.dim, 0.0);
    // Stationary per-axis scale of the truthful AR(1) chain equals
    // truth_cov_scale (before the token kick widens it).
    noise_std_ = spec_.truth_cov_scale * std::sqrt(1.0 - spec_.reversion * spec_.reversion);
}

void SyntheticBackend::emit_logits(std::vector<double> & out) const {
    out.resize(spec_.vocab_size);
    for (uint32_t v = 0; v < spec_.vocab_size; ++v) {
        out[v] = kern::dot(spec_.emission.data() + size_t(v) * spec_.dim, head_.data(), spec_.dim);
    }
}

StepOutput SyntheticBackend::step(int sampled_token, double temperature) {
    if (sampled_token < 0 || uint32_t(sampled_token) >= spec_.vocab_size) {
        throw bad_input("synthetic backend: token out of vocabulary");
    }
    if (temperature < 0.0) {
        throw bad_input("synthetic backend: negative temperature");
    }

    // Regime transitions react to the token sampled from the previous step.
    // A divergent episode ends when sampling deviated from the mode (the
    // redirect that steering makes likelier) or on the natural reset draw.
    if (divergent_) {
        const bool redirected = last_argmax_ >= 0 && sampled_token != last_argmax_;
        if (redirected || rng_.uniform() < spec_.divergence_reset_prob) {
            divergent_ = false;
        }
    } else if (spec_.drift_rate > 0.0) {
        if (rng_.uniform() < std::min(1.0, spec_.drift_rate * temperature)) {
            divergent_ = true;
            auto pick_direction = [&](std::vector<double> & u, const double * away_from,
                                      const double * at) {
                rng_.fill_gaussian(u);
                const double norm = std::sqrt(kern::sum_sq(u.data(), u.size()));
                for (auto & c : u) {
                    c /= (norm > 0 ? norm : 1.0);
                }
                double radial = 0.0;
                for (uint32_t i = 0; i < spec_.dim; ++i) {
                    radial += u[i] * (at[i] - away_from[i]);
                }
                if (radial < 0.0) {
                    for (auto & c : u) c = -c;
                }
            };
            // Steered layers march away from the truth mean. The head
            // either dips toward the origin (flat logits, entropy spike)
            // or locks outward (sharpening logits, mode-locked runaway).
            for (size_t l = 0; l < state_.size(); ++l) {
                pick_direction(direction_[l], spec_.truth_mean.data(), state_[l].data());
            }
            const std::vector<double> origin(spec_.dim, 0.0);
            const bool dip = rng_.uniform() < spec_.head_dip_fraction;
            pick_direction(head_direction_, origin.data(), head_.data());
            if (dip) {
                // Straight at the origin, so one step flattens the logits.
                const double norm = std::sqrt(kern::sum_sq(head_.data(), head_.size()));
                if (norm > 0) {
                    for (uint32_t i = 0; i < spec_.dim; ++i) {
                        head_direction_[i] = -head_[i] / norm;
                    }
                }
                head_step_ = spec_.head_dip_step > 0.0
                                 ? spec_.head_dip_step
                                 : std::sqrt(kern::sum_sq(spec_.truth_mean.data(), spec_.dim));
            } else {
                head_step_ = spec_.head_lock_step;
            }
        }
    }

    const double * kick = kick_dirs_.data() + size_t(sampled_token) * spec_.dim;
    if (divergent_) {
        // Outward march, constant direction, no noise: the planted distance
        // increases strictly until the episode resets.
        for (size_t l = 0; l < state_.size(); ++l) {
            kern::axpy(spec_.divergence_step, direction_[l].data(), state_[l].data(), spec_.dim);
        }
        kern::axpy(head_step_, head_direction_.data(), head_.data(), spec_.dim);
    } else {
        for (size_t l = 0; l < state_.size(); ++l) {
            auto & x = state_[l];
            for (uint32_t i = 0; i < spec_.dim; ++i) {
                const double pull = spec_.truth_mean[i] + spec_.reversion * (x[i] - spec_.truth_mean[i]);
                x[i] = pull + spec_.token_kick * kick[i] + noise_std_ * rng_.gaussian();
            }
        }
        for (uint32_t i = 0; i < spec_.dim; ++i) {
            const double pull = spec_.truth_mean[i] + spec_.reversion * (head_[i] - spec_.truth_mean[i]);
            head_[i] = pull + spec_.head_noise * rng_.gaussian();
        }
    }

    StepOutput out;
    emit_logits(out.logits);
    for (size_t l = 0; l < spec_.layer_ids.size(); ++l) {
        out.hidden[spec_.layer_ids[l]] = state_[l];
    }

    size_t best = 0;
    for (uint32_t v = 1; v < spec_.vocab_size; ++v) {
        if (out.logits[v] > out.logits[best]) best = v;
    }
    last_argmax_ = int(best);
    return out;
}

std::vector<double> stationary_sample(const SyntheticSpec & spec, rng & r) {
    std::vector<double> mu = derive_truth_mean(spec);
    std::vector<double> x(spec.dim);
    for (uint32_t i = 0; i < spec.dim; ++i) {
        x[i] = mu[i] + spec.truth_cov_scale * r.gaussian();
    }
    return x;
}

} // namespace helix
