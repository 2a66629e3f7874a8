#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace helix {

// One hidden-state vector tagged with the layer it was extracted from.
struct ActivationSample {
    uint32_t layer_id = 0;
    std::vector<double> vec;
};

// Streaming (Welford) moment accumulator for one layer.
// mean and m2 update in a single pass; m2 holds the sum of outer-product
// deviations, packed lower-triangular row-major: m2[i*(i+1)/2 + j], j <= i.
// Two accumulators built on disjoint shards merge associatively.
class RunningStats {
  public:
    RunningStats() = default;
    explicit RunningStats(size_t dim);

    // Rejects dimension mismatches and non-finite entries. An empty
    // accumulator adopts the first sample's dimension.
    void accumulate(std::span<const double> sample);

    // Chan et al. pairwise merge; associative up to roundoff.
    void merge(const RunningStats & other);

    uint64_t count() const { return count_; }
    size_t dim() const { return mean_.size(); }
    const std::vector<double> & mean() const { return mean_; }
    const std::vector<double> & m2_packed() const { return m2_; }

  private:
    uint64_t count_ = 0;
    std::vector<double> mean_;
    std::vector<double> m2_; // packed lower triangle, d*(d+1)/2
};

// Finalized per-layer Gaussian model. Stores the lower-triangular Cholesky
// factor L of the regularized covariance (cov + lambda*I = L*L^T), packed
// row-major like RunningStats::m2. The factor both certifies positive
// definiteness and serves Mahalanobis queries in O(d^2) via one forward
// solve, with no explicit matrix inverse anywhere.
struct LayerManifold {
    uint32_t layer_id = 0;
    std::vector<double> mean;
    std::vector<double> chol_packed; // L, d*(d+1)/2
    double lambda = 0.0;
    double d_ref = 1.0;
    uint64_t sample_count = 0;

    size_t dim() const { return mean.size(); }
};

// cov = m2/(count-1) + lambda*I, factorized. Throws on count < 2 or when
// the factorization breaks down despite regularization.
LayerManifold finalize(const RunningStats & stats, uint32_t layer_id, double lambda);

// Mahalanobis distance of h from the layer's mean. O(d^2).
double mahalanobis(const LayerManifold & lm, std::span<const double> h);

// Set d_ref from held-out distances so that exp(-q68/d_ref) = 0.6, where
// q68 is the empirical 68.27th percentile (nearest-rank). Roughly 68% of
// the held-out set then scores exp(-D/d_ref) >= 0.6.
void calibrate_dref(LayerManifold & lm, std::span<const double> held_out_distances);

// Convenience: computes the held-out distances first.
void calibrate_dref(LayerManifold & lm, const std::vector<std::vector<double>> & held_out);

struct ManifoldMetadata {
    std::string corpus;       // free-form descriptor, not persisted by HLXM v1
    double build_temperature = 0.0;
    uint32_t format_version = 1;
};

// Ordered collection of per-layer models. Immutable once built; safe for
// concurrent reads from many generation streams.
struct Manifold {
    std::vector<LayerManifold> layers; // sorted ascending by layer_id, unique
    ManifoldMetadata meta;

    const LayerManifold * find(uint32_t layer_id) const;
    void add(LayerManifold lm); // keeps ordering, rejects duplicate ids
};

// HLXM file format v1 (little-endian):
//   magic "HLXM", u32 version, u32 layer_count,
//   per layer: u32 layer_id, u32 d, f64 lambda, f64 d_ref, u64 sample_count,
//              f64[d] mean, f64[d*(d+1)/2] packed lower-triangular L,
//   u32 crc32 over all preceding bytes.
// Round-trips are bit-exact.
void save_manifold(const Manifold & m, const std::string & path);
Manifold load_manifold(const std::string & path);

std::vector<uint8_t> serialize_manifold(const Manifold & m);
Manifold deserialize_manifold(const std::vector<uint8_t> & bytes);

} // namespace helix
