#include <doctest.h>

#include "helix/error.hpp"
#include "helix/rng.hpp"
#include "helix/scoring.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace helix;

namespace {

// Identity-covariance single-layer manifold for score() plumbing tests.
Manifold identity_manifold(uint32_t layer, size_t d, double d_ref = 1.0) {
    LayerManifold lm;
    lm.layer_id = layer;
    lm.mean.assign(d, 0.0);
    lm.chol_packed.assign(d * (d + 1) / 2, 0.0);
    size_t k = 0;
    for (size_t i = 0; i < d; ++i) {
        for (size_t j = 0; j <= i; ++j, ++k) {
            if (i == j) lm.chol_packed[k] = 1.0;
        }
    }
    lm.d_ref = d_ref;
    lm.sample_count = 2;
    Manifold m;
    m.add(std::move(lm));
    return m;
}

} // namespace

TEST_CASE("entropy: maximum-entropy and near-one-hot cases") {
    CHECK(entropy(std::vector<double>{1.0, 1.0, 1.0, 1.0}) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(entropy(std::vector<double>{100.0, 0.0, 0.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("entropy: hand-computed two-logit case") {
    // softmax(ln 3, 0) = (0.75, 0.25)
    const double h = entropy(std::vector<double>{std::log(3.0), 0.0});
    const double expected = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
    CHECK(h == doctest::Approx(expected).epsilon(1e-12));
    CHECK(h == doctest::Approx(0.5623).epsilon(1e-4));
}

TEST_CASE("entropy: rejects degenerate input") {
    CHECK_THROWS_AS(entropy(std::vector<double>{1.0}), error);
    CHECK_THROWS_AS(entropy(std::vector<double>{1.0, std::nan("")}), error);
    CHECK_THROWS_AS(entropy(std::vector<double>{1.0, INFINITY}), error);
}

TEST_CASE("entropy: matches long-double oracle within 1e-10 up to V=1000") {
    rng r(53);
    for (size_t v : {2u, 3u, 17u, 100u, 1000u}) {
        for (int rep = 0; rep < 25; ++rep) {
            std::vector<double> logits(v);
            for (auto & z : logits) z = 6.0 * r.gaussian();
            CHECK(oracle::rel_err(entropy(logits), oracle::entropy_ld(logits)) < 1e-10);
        }
    }
}

TEST_CASE("entropy: extreme logit spread stays finite and sane") {
    const double h = entropy(std::vector<double>{1000.0, -1000.0, 500.0, 0.0});
    CHECK(std::isfinite(h));
    CHECK(h >= 0.0);
    CHECK(h <= std::log(4.0));
}

TEST_CASE("semantic confidence: boundary and midpoint cases") {
    CHECK(semantic_confidence(std::log(4.0), 4) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(semantic_confidence(0.0, 4) == 1.0);
    // V=4 with two-way 50/50 mass: H = ln 2, S_E = 1 - ln2/ln4 = 0.5
    CHECK(semantic_confidence(std::log(2.0), 4) == doctest::Approx(0.5).epsilon(1e-12));
    // tiny float excess above ln V clamps instead of going negative
    CHECK(semantic_confidence(std::log(4.0) + 1e-13, 4) == 0.0);
    CHECK_THROWS_AS(semantic_confidence(1.0, 1), error);
}

TEST_CASE("manifold confidence: exponential decay law") {
    CHECK(manifold_confidence(0.0, 2.0) == 1.0);
    CHECK(manifold_confidence(2.0, 2.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(manifold_confidence(0.51082562376599068, 1.0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK_THROWS_AS(manifold_confidence(1.0, 0.0), error);
}

TEST_CASE("handover weight: midpoint and derived evaluations") {
    HandoverParams p; // kappa=2, t_c=1.5
    CHECK(handover_weight(1.5, p) == 0.5);
    CHECK(handover_weight(0.5, p) == doctest::Approx(0.88080).epsilon(1e-5));
    CHECK(handover_weight(3.0, p) == doctest::Approx(0.04743).epsilon(1e-4));
    // strictly decreasing
    double prev = handover_weight(0.05, p);
    for (double t = 0.1; t <= 4.0; t += 0.05) {
        const double b = handover_weight(t, p);
        CHECK(b < prev);
        prev = b;
    }
}

TEST_CASE("score: perfect confidence and midpoint handover") {
    // Construct hidden state at the mean (S_D = 1) and near-one-hot logits
    // (S_E ~ 1): UTS ~ 1 at any temperature.
    const auto m = identity_manifold(4, 3);
    std::map<uint32_t, std::vector<double>> hidden;
    hidden[4] = {0.0, 0.0, 0.0};
    HandoverParams p;
    for (double t : {0.3, 1.0, 1.5, 2.9}) {
        const auto sb = score(std::vector<double>{80.0, 0.0, 0.0, 0.0}, hidden, m, t, p,
                              SdAggregation::mean, std::vector<uint32_t>{4});
        CHECK(sb.uts == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("score: UTS is the exact convex combination") {
    const auto m = identity_manifold(4, 2);
    std::map<uint32_t, std::vector<double>> hidden;
    hidden[4] = {1.0, 0.0}; // D = 1, S_D = exp(-1)
    HandoverParams p;
    const std::vector<double> logits = {2.0, 1.0, 0.0, -1.0};
    const auto sb = score(logits, hidden, m, 1.5, p, SdAggregation::mean, std::vector<uint32_t>{4});
    CHECK(sb.beta_t == 0.5);
    CHECK(sb.per_layer_distance.at(4) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sb.s_d == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(sb.uts == sb.beta_t * sb.s_e + (1.0 - sb.beta_t) * sb.s_d); // exact identity
    CHECK(sb.uts >= 0.0);
    CHECK(sb.uts <= 1.0);
}

TEST_CASE("score: handover weights match hand-computed UTS at T=3") {
    // S_E = 0.8, S_D = 0.4 via direct fields: verify the combination rule
    // numerically using beta(3.0).
    HandoverParams p;
    const double beta = handover_weight(3.0, p);
    const double uts = beta * 0.8 + (1.0 - beta) * 0.4;
    CHECK(uts == doctest::Approx(0.4190).epsilon(1e-3));
    const double uts_mid = 0.5 * 0.8 + 0.5 * 0.4;
    CHECK(uts_mid == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("score: missing layers are reported") {
    const auto m = identity_manifold(4, 2);
    std::map<uint32_t, std::vector<double>> hidden;
    hidden[4] = {0.0, 0.0};
    HandoverParams p;
    CHECK_THROWS_AS(score(std::vector<double>{1.0, 0.0}, hidden, m, 1.0, p, SdAggregation::mean,
                          std::vector<uint32_t>{4, 12}),
                    error);
    std::map<uint32_t, std::vector<double>> missing;
    CHECK_THROWS_AS(score(std::vector<double>{1.0, 0.0}, missing, m, 1.0, p, SdAggregation::mean,
                          std::vector<uint32_t>{4}),
                    error);
}

TEST_CASE("aggregate_sd: mean, min, max modes") {
    std::map<uint32_t, double> s = {{4, 0.2}, {12, 0.6}, {20, 0.7}};
    CHECK(aggregate_sd(s, SdAggregation::mean) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(aggregate_sd(s, SdAggregation::min) == 0.2);
    CHECK(aggregate_sd(s, SdAggregation::max) == 0.7);
}

TEST_CASE("UTS temperature sensitivity: analytic derivative vs finite differences") {
    HandoverParams p;
    const double h = 1e-5;
    for (double s_e : {0.1, 0.5, 0.9}) {
        for (double s_d : {0.2, 0.5, 0.8}) {
            for (double t = 0.3; t <= 3.5; t += 0.16) {
                auto uts_at = [&](double tt) {
                    const double b = handover_weight(tt, p);
                    return b * s_e + (1.0 - b) * s_d;
                };
                const double fd = (uts_at(t + h) - uts_at(t - h)) / (2.0 * h);
                const double b = handover_weight(t, p);
                const double analytic = -p.kappa * b * (1.0 - b) * (s_e - s_d);
                CHECK(std::abs(fd - analytic) < 1e-6);
                if (s_e > s_d) CHECK(fd < 0.0);
                if (s_e < s_d) CHECK(fd > 0.0);
            }
        }
    }
}

TEST_CASE("adaptive handover bounds at temperature extremes") {
    HandoverParams p;
    for (double s_e : {0.15, 0.6, 0.95}) {
        for (double s_d : {0.1, 0.45, 0.9}) {
            const double gap = std::abs(s_e - s_d);
            for (double t : {0.05, 0.2, 0.35, 0.5}) {
                const double b = handover_weight(t, p);
                const double uts = b * s_e + (1.0 - b) * s_d;
                CHECK(std::abs(uts - s_e) <= 0.12 * gap + 1e-15);
            }
            for (double t : {3.0, 3.5, 4.0}) {
                const double b = handover_weight(t, p);
                const double uts = b * s_e + (1.0 - b) * s_d;
                CHECK(std::abs(uts - s_d) <= 0.05 * gap + 1e-15);
            }
        }
    }
}
