#include "helix/steering.hpp"

#include "helix/error.hpp"
#include "helix/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace helix {

namespace {

double logistic(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

size_t argmax_index(std::span<const double> v) {
    size_t best = 0;
    for (size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

uint64_t fnv1a(const std::string & s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h = (h ^ c) * 0x100000001b3ull;
    }
    return h;
}

// Categorical draw from softmax((z + delta)/T). delta is the sparse steering
// modification (additive, at most one index). T == 0 degenerates to argmax.
int sample_token(std::span<const double> logits,
                 int steered_idx,
                 double delta,
                 double temperature,
                 rng & r,
                 std::vector<double> & scratch,
                 int top_k,
                 double top_p) {
    const size_t v = logits.size();
    if (temperature <= 0.0) {
        size_t best = 0;
        double best_val = logits[0] + (steered_idx == 0 ? delta : 0.0);
        for (size_t i = 1; i < v; ++i) {
            const double val = logits[i] + (int(i) == steered_idx ? delta : 0.0);
            if (val > best_val) {
                best_val = val;
                best = i;
            }
        }
        return int(best);
    }

    // Shift by the raw max; the steered entry only moves down, so the shift
    // stays an upper bound and the exponentials stay in range.
    const double m = kern::reduce_max(logits.data(), v);
    double sum = kern::exp_scaled(logits.data(), scratch.data(), v, m, 1.0 / temperature);
    if (steered_idx >= 0 && delta != 0.0) {
        const double fixed = std::exp((logits[size_t(steered_idx)] + delta - m) / temperature);
        sum += fixed - scratch[size_t(steered_idx)];
        scratch[size_t(steered_idx)] = fixed;
    }

    if (top_k > 0 && size_t(top_k) < v) {
        std::vector<size_t> idx(v);
        std::iota(idx.begin(), idx.end(), 0);
        std::nth_element(idx.begin(), idx.begin() + top_k, idx.end(),
                         [&](size_t a, size_t b) { return scratch[a] > scratch[b]; });
        sum = 0.0;
        std::vector<bool> keep(v, false);
        for (int i = 0; i < top_k; ++i) {
            keep[idx[size_t(i)]] = true;
            sum += scratch[idx[size_t(i)]];
        }
        for (size_t i = 0; i < v; ++i) {
            if (!keep[i]) scratch[i] = 0.0;
        }
    }
    if (top_p < 1.0) {
        std::vector<size_t> idx(v);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scratch[a] > scratch[b]; });
        const double target = top_p * sum;
        double acc = 0.0;
        size_t kept = 0;
        while (kept < v && acc < target) {
            acc += scratch[idx[kept]];
            ++kept;
        }
        for (size_t i = kept; i < v; ++i) {
            scratch[idx[i]] = 0.0;
        }
        sum = acc;
    }

    const double u = r.uniform() * sum;
    double acc = 0.0;
    int last_positive = -1;
    for (size_t i = 0; i < v; ++i) {
        if (scratch[i] > 0.0) last_positive = int(i);
        acc += scratch[i];
        if (u < acc) {
            return int(i);
        }
    }
    return last_positive >= 0 ? last_positive : int(v - 1);
}

TelemetryRecord make_record(int step, int token, const TokenDecision & dec, double temperature, int stream_id) {
    TelemetryRecord rec;
    rec.step = step;
    rec.token_id = token;
    rec.entropy_nats = dec.scores.entropy_nats;
    rec.s_e = dec.scores.s_e;
    rec.s_d = dec.scores.s_d;
    rec.beta_t = dec.scores.beta_t;
    rec.uts = dec.scores.uts;
    rec.tau_t = dec.tau_t;
    rec.d_layers = dec.scores.per_layer_distance;
    rec.steered = dec.steered;
    rec.penalty = dec.penalty_applied;
    rec.temperature = temperature;
    rec.stream_id = stream_id;
    return rec;
}

} // namespace

void SteeringConfig::validate() const {
    if (!(tau0 > 0.0) || tau0 > 1.0) {
        throw bad_input("config: tau0 must be in (0,1]");
    }
    if (gamma < 0.0) {
        throw bad_input("config: gamma must be >= 0");
    }
    if (!(t_base > 0.0)) {
        throw bad_input("config: t_base must be > 0");
    }
    if (penalty_scale < 0.0) {
        throw bad_input("config: penalty_scale must be >= 0");
    }
    if (!(handover.kappa > 0.0)) {
        throw bad_input("config: kappa must be > 0");
    }
    if (steering_layers.empty()) {
        throw bad_input("config: steering_layers must be non-empty");
    }
}

double adaptive_threshold(double temperature, const SteeringConfig & cfg) {
    const double excess = std::max(0.0, temperature - cfg.t_base);
    return cfg.tau0 / (1.0 + cfg.gamma * excess);
}

double steer_penalty(double shortfall, const SteeringConfig & cfg) {
    // Pure shape function; callers gate on uts < tau. paper_literal keeps
    // the printed sigmoid (0.5*scale right at the boundary), the default
    // shape rises continuously from zero there.
    switch (cfg.penalty_shape) {
        case PenaltyShape::paper_literal:
            return cfg.penalty_scale * logistic(shortfall);
        case PenaltyShape::boundary_continuous:
            return std::max(0.0, cfg.penalty_scale * (2.0 * logistic(shortfall) - 1.0));
    }
    return 0.0;
}

double steer_logits(std::span<double> logits, double uts, double tau, const SteeringConfig & cfg) {
    for (double z : logits) {
        if (!std::isfinite(z)) {
            throw bad_input("steer_logits: non-finite logit");
        }
    }
    if (uts >= tau) {
        return 0.0;
    }
    const double penalty = steer_penalty(tau - uts, cfg);
    if (penalty > 0.0) {
        logits[argmax_index(logits)] -= penalty;
    }
    return penalty;
}

TokenDecision decide(std::span<const double> logits,
                     const std::map<uint32_t, std::vector<double>> & hidden_states,
                     const Manifold & manifold,
                     double temperature,
                     const SteeringConfig & cfg) {
    TokenDecision dec;
    dec.scores = score(logits, hidden_states, manifold, temperature,
                       cfg.handover, cfg.sd_aggregation, cfg.steering_layers);
    dec.tau_t = adaptive_threshold(temperature, cfg);
    dec.steered = dec.scores.uts < dec.tau_t;
    if (dec.steered) {
        dec.argmax_index = int(argmax_index(logits));
        dec.penalty_applied = steer_penalty(dec.tau_t - dec.scores.uts, cfg);
        if (dec.penalty_applied > 0.0) {
            dec.modified_logits_delta[dec.argmax_index] = -dec.penalty_applied;
        }
    }
    return dec;
}

std::string GenerationTrace::text() const {
    std::string s;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) s += ' ';
        s += 't';
        s += std::to_string(tokens[i]);
    }
    return s;
}

double GenerationTrace::mean_uts() const {
    if (records.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (const auto & r : records) sum += r.uts;
    return sum / double(records.size());
}

GenerationTrace generate(Backend & backend,
                         const Manifold & manifold,
                         const std::string & prompt,
                         double temperature,
                         const SteeringConfig & cfg,
                         const GenerateOptions & opts,
                         TelemetrySink * sink) {
    cfg.validate();
    if (temperature < 0.0) {
        throw bad_input("generate: temperature must be >= 0");
    }

    GenerationTrace trace;
    trace.prompt = prompt;
    trace.temperature = temperature;
    trace.sampler_seed = opts.sampler_seed;

    // The prompt conditions the stream through the sampler seed; the
    // synthetic backend has no tokenizer to feed it through.
    rng sampler(seed_mix(opts.sampler_seed, fnv1a(prompt)));
    std::vector<double> scratch(backend.vocab_size());

    int token = 0;
    for (int step = 0; step < opts.max_tokens; ++step) {
        StepOutput out;
        try {
            out = backend.step(token, temperature);
        } catch (const error & e) {
            trace.error = e.what();
            break;
        }
        if (out.is_end) {
            break;
        }

        TokenDecision dec;
        if (opts.steering_enabled) {
            dec = decide(out.logits, out.hidden, manifold, temperature, cfg);
        }

        token = sample_token(out.logits,
                             dec.steered ? dec.argmax_index : -1,
                             -dec.penalty_applied,
                             temperature, sampler, scratch, opts.top_k, opts.top_p);
        trace.tokens.push_back(token);

        if (opts.steering_enabled) {
            trace.records.push_back(make_record(step, token, dec, temperature, opts.stream_id));
            if (sink && !trace.telemetry_degraded) {
                if (!sink->write_line(to_jsonl(trace.records.back()))) {
                    trace.telemetry_degraded = true;
                }
            }
        }
    }
    if (sink) {
        sink->flush();
    }
    return trace;
}

} // namespace helix
