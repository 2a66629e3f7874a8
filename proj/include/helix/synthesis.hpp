#pragma once

#include "helix/metrics.hpp"
#include "helix/steering.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace helix {

// Identifies one sweep cell output.
struct OutputId {
    size_t temperature_index = 0;
    size_t sample_index = 0;
    size_t flat = 0; // global index in enumeration order
};

struct ConceptCluster {
    size_t id = 0;
    size_t representative = 0;     // flat output id, smallest in the cluster
    std::vector<size_t> members;   // flat output ids, ascending
};

struct RangeLabel {
    std::string label;
    double t_lo = 0.0;
    double t_hi = 0.0; // inclusive
};

struct RangeStats {
    std::string label;
    size_t idea_count = 0;        // clusters with at least one member in range
    double duplication_rate = 0.0; // fraction of in-range pairs with sim >= theta
    size_t pair_count = 0;
    double mean_uts = 0.0;
    uint64_t steer_count = 0;
    bool degenerate = false;       // fewer than two in-range outputs
};

struct SweepCell {
    OutputId id;
    GenerationTrace trace;
    bool failed = false;
    std::string error;
};

struct SweepReport {
    std::string prompt;
    std::vector<double> temperatures;
    uint64_t base_seed = 0;
    std::vector<SweepCell> cells;          // enumeration order: T-major, sample-minor
    std::vector<ConceptCluster> clusters;
    std::vector<RangeStats> per_range;
    size_t unique_total = 0;
    double theta_dup = 0.7;
    std::string similarity_provider;

    std::vector<std::string> output_texts() const; // failed cells excluded
};

// The 11-point grid used throughout: 0.5, 0.7, then 0.25 steps to 3.0.
std::vector<double> default_temperature_grid();

std::vector<RangeLabel> default_ranges(); // Low 0.5-1.0, Mid 1.25-2.0, High 2.25-3.0

// Factory for one cell's backend, so every cell owns an independent stream.
using BackendFactory = std::function<std::unique_ptr<Backend>(uint64_t cell_seed)>;

// Runs generate() per (T, sample) with cell seed = mix(base_seed, t_index,
// sample). Cells run concurrently; assembly is deterministic. Per-cell
// failures are recorded and the sweep continues.
SweepReport sweep(const std::string & prompt,
                  const std::vector<double> & temperatures,
                  const BackendFactory & factory,
                  const Manifold & manifold,
                  const SteeringConfig & cfg,
                  const GenerateOptions & base_opts,
                  size_t samples_per_t,
                  uint64_t base_seed);

// Single-link clustering: connected components of the graph joining i,j
// when sim >= theta. Order-independent.
std::vector<ConceptCluster> dedupe(const std::vector<std::string> & outputs,
                                   const SimilarityProvider & provider,
                                   double theta = 0.7);

// Populates report.clusters / unique_total from the cell texts.
void cluster_report(SweepReport & report, const SimilarityProvider & provider, double theta);

// Per-range duplication, idea counts and telemetry aggregates. Ranges must
// cover every grid temperature exactly once.
std::vector<RangeStats> range_stats(const SweepReport & report,
                                    const std::vector<RangeLabel> & ranges,
                                    const SimilarityProvider & provider,
                                    double theta_dup);

// Exports. JSON is the full report; CSV covers per_range; the digest lists
// one representative text per cluster.
std::string sweep_report_json(const SweepReport & report);
std::string range_stats_csv(const std::vector<RangeStats> & stats);
std::string cluster_digest(const SweepReport & report);

} // namespace helix
