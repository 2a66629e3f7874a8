#include "helix/synthesis.hpp"

#include "helix/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace helix {

std::vector<double> default_temperature_grid() {
    return {0.5, 0.7, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0};
}

std::vector<RangeLabel> default_ranges() {
    return {
        {"low", 0.5, 1.0},
        {"mid", 1.25, 2.0},
        {"high", 2.25, 3.0},
    };
}

SweepReport sweep(const std::string & prompt,
                  const std::vector<double> & temperatures,
                  const BackendFactory & factory,
                  const Manifold & manifold,
                  const SteeringConfig & cfg,
                  const GenerateOptions & base_opts,
                  size_t samples_per_t,
                  uint64_t base_seed) {
    if (temperatures.empty()) {
        throw bad_input("sweep: empty temperature grid");
    }
    if (samples_per_t < 1) {
        throw bad_input("sweep: samples_per_t must be >= 1");
    }

    SweepReport report;
    report.prompt = prompt;
    report.temperatures = temperatures;
    report.base_seed = base_seed;
    report.cells.resize(temperatures.size() * samples_per_t);

    for (size_t ti = 0; ti < temperatures.size(); ++ti) {
        for (size_t si = 0; si < samples_per_t; ++si) {
            const size_t flat = ti * samples_per_t + si;
            report.cells[flat].id = {ti, si, flat};
        }
    }

    // Cells are embarrassingly parallel: independent backend, derived seed,
    // private result slot. Assembly order is fixed by the flat index.
    std::atomic<size_t> next{0};
    auto run_cells = [&]() {
        for (;;) {
            const size_t flat = next.fetch_add(1);
            if (flat >= report.cells.size()) {
                break;
            }
            SweepCell & cell = report.cells[flat];
            const double t = temperatures[cell.id.temperature_index];
            const uint64_t cell_seed =
                seed_mix(base_seed, cell.id.temperature_index, cell.id.sample_index);
            try {
                auto backend = factory(cell_seed);
                GenerateOptions opts = base_opts;
                opts.sampler_seed = cell_seed;
                opts.stream_id = int(flat);
                cell.trace = generate(*backend, manifold, prompt, t, cfg, opts, nullptr);
                if (!cell.trace.error.empty()) {
                    cell.failed = true;
                    cell.error = cell.trace.error;
                }
            } catch (const std::exception & e) {
                cell.failed = true;
                cell.error = e.what();
            }
        }
    };

    const unsigned hw = std::thread::hardware_concurrency();
    const size_t workers = std::max<size_t>(1, std::min<size_t>(hw ? hw : 2, report.cells.size()));
    if (workers == 1) {
        run_cells();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (size_t w = 0; w < workers; ++w) {
            pool.emplace_back(run_cells);
        }
        for (auto & th : pool) {
            th.join();
        }
    }
    return report;
}

std::vector<std::string> SweepReport::output_texts() const {
    std::vector<std::string> texts;
    texts.reserve(cells.size());
    for (const auto & c : cells) {
        if (!c.failed) {
            texts.push_back(c.trace.text());
        }
    }
    return texts;
}

std::vector<ConceptCluster> dedupe(const std::vector<std::string> & outputs,
                                   const SimilarityProvider & provider,
                                   double theta) {
    if (!(theta > 0.0) || theta > 1.0) {
        throw bad_input("dedupe: theta must be in (0,1]");
    }
    const size_t n = outputs.size();
    std::vector<size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<size_t(size_t)> find = [&](size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            if (provider.sim(outputs[i], outputs[j]) >= theta) {
                const size_t ri = find(i), rj = find(j);
                if (ri != rj) {
                    parent[std::max(ri, rj)] = std::min(ri, rj);
                }
            }
        }
    }

    std::map<size_t, ConceptCluster> by_root;
    for (size_t i = 0; i < n; ++i) {
        by_root[find(i)].members.push_back(i);
    }
    std::vector<ConceptCluster> clusters;
    clusters.reserve(by_root.size());
    for (auto & [root, c] : by_root) {
        c.id = clusters.size();
        c.representative = c.members.front();
        clusters.push_back(std::move(c));
    }
    return clusters;
}

namespace {

// Successful cells in flat order, paired with their texts.
std::vector<size_t> ok_cells(const SweepReport & report) {
    std::vector<size_t> ids;
    for (const auto & c : report.cells) {
        if (!c.failed) ids.push_back(c.id.flat);
    }
    return ids;
}

} // namespace

void cluster_report(SweepReport & report, const SimilarityProvider & provider, double theta) {
    const auto ids = ok_cells(report);
    std::vector<std::string> texts;
    texts.reserve(ids.size());
    for (size_t id : ids) {
        texts.push_back(report.cells[id].trace.text());
    }
    auto clusters = dedupe(texts, provider, theta);
    // dedupe indexes into the compacted text list; translate back to flat ids.
    for (auto & c : clusters) {
        for (auto & m : c.members) {
            m = ids[m];
        }
        c.representative = c.members.front();
    }
    report.clusters = std::move(clusters);
    report.unique_total = report.clusters.size();
    report.theta_dup = theta;
    report.similarity_provider = provider.id();
}

std::vector<RangeStats> range_stats(const SweepReport & report,
                                    const std::vector<RangeLabel> & ranges,
                                    const SimilarityProvider & provider,
                                    double theta_dup) {
    // Ranges must partition the grid.
    for (double t : report.temperatures) {
        int hits = 0;
        for (const auto & r : ranges) {
            if (t >= r.t_lo - 1e-9 && t <= r.t_hi + 1e-9) ++hits;
        }
        if (hits != 1) {
            throw bad_input("range_stats: ranges must cover each grid temperature exactly once");
        }
    }

    std::vector<RangeStats> out;
    for (const auto & range : ranges) {
        RangeStats rs;
        rs.label = range.label;

        std::vector<size_t> in_range;
        for (const auto & c : report.cells) {
            if (c.failed) continue;
            const double t = report.temperatures[c.id.temperature_index];
            if (t >= range.t_lo - 1e-9 && t <= range.t_hi + 1e-9) {
                in_range.push_back(c.id.flat);
            }
        }

        for (const auto & cluster : report.clusters) {
            bool hit = false;
            for (size_t m : cluster.members) {
                const double t = report.temperatures[report.cells[m].id.temperature_index];
                if (t >= range.t_lo - 1e-9 && t <= range.t_hi + 1e-9) {
                    hit = true;
                    break;
                }
            }
            if (hit) ++rs.idea_count;
        }

        if (in_range.size() < 2) {
            rs.degenerate = true;
        } else {
            size_t dup = 0;
            for (size_t i = 0; i < in_range.size(); ++i) {
                for (size_t j = i + 1; j < in_range.size(); ++j) {
                    ++rs.pair_count;
                    const double s = provider.sim(report.cells[in_range[i]].trace.text(),
                                                  report.cells[in_range[j]].trace.text());
                    if (s >= theta_dup) ++dup;
                }
            }
            rs.duplication_rate = rs.pair_count ? double(dup) / double(rs.pair_count) : 0.0;
        }

        double uts_sum = 0.0;
        uint64_t token_count = 0;
        for (size_t id : in_range) {
            for (const auto & rec : report.cells[id].trace.records) {
                uts_sum += rec.uts;
                ++token_count;
                if (rec.steered) ++rs.steer_count;
            }
        }
        rs.mean_uts = token_count ? uts_sum / double(token_count) : 0.0;
        out.push_back(std::move(rs));
    }
    return out;
}

std::string sweep_report_json(const SweepReport & report) {
    nlohmann::json j;
    j["prompt"] = report.prompt;
    j["temperatures"] = report.temperatures;
    j["base_seed"] = report.base_seed;
    j["theta_dup"] = report.theta_dup;
    j["similarity_provider"] = report.similarity_provider;
    j["unique_total"] = report.unique_total;

    auto & cells = j["cells"] = nlohmann::json::array();
    for (const auto & c : report.cells) {
        nlohmann::json jc;
        jc["flat"] = c.id.flat;
        jc["temperature_index"] = c.id.temperature_index;
        jc["sample_index"] = c.id.sample_index;
        jc["temperature"] = report.temperatures[c.id.temperature_index];
        jc["failed"] = c.failed;
        if (c.failed) {
            jc["error"] = c.error;
        } else {
            jc["sampler_seed"] = c.trace.sampler_seed;
            jc["tokens"] = c.trace.tokens;
            jc["text"] = c.trace.text();
            jc["mean_uts"] = c.trace.mean_uts();
            jc["telemetry_degraded"] = c.trace.telemetry_degraded;
            auto & recs = jc["records"] = nlohmann::json::array();
            for (const auto & r : c.trace.records) {
                nlohmann::json jr;
                jr["step"] = r.step;
                jr["token_id"] = r.token_id;
                jr["entropy_nats"] = r.entropy_nats;
                jr["s_e"] = r.s_e;
                jr["s_d"] = r.s_d;
                jr["beta_t"] = r.beta_t;
                jr["uts"] = r.uts;
                jr["tau_t"] = r.tau_t;
                nlohmann::json dl;
                for (const auto & [layer, d] : r.d_layers) {
                    dl[std::to_string(layer)] = d;
                }
                jr["d_layers"] = dl;
                jr["steered"] = r.steered;
                jr["penalty"] = r.penalty;
                jr["temperature"] = r.temperature;
                jr["stream_id"] = r.stream_id;
                recs.push_back(std::move(jr));
            }
        }
        cells.push_back(std::move(jc));
    }

    auto & clusters = j["clusters"] = nlohmann::json::array();
    for (const auto & c : report.clusters) {
        nlohmann::json jc;
        jc["id"] = c.id;
        jc["representative"] = c.representative;
        jc["members"] = c.members;
        clusters.push_back(std::move(jc));
    }

    auto & ranges = j["per_range"] = nlohmann::json::array();
    for (const auto & r : report.per_range) {
        nlohmann::json jr;
        jr["label"] = r.label;
        jr["idea_count"] = r.idea_count;
        jr["duplication_rate"] = r.duplication_rate;
        jr["pair_count"] = r.pair_count;
        jr["mean_uts"] = r.mean_uts;
        jr["steer_count"] = r.steer_count;
        jr["degenerate"] = r.degenerate;
        ranges.push_back(std::move(jr));
    }
    return j.dump(2);
}

std::string range_stats_csv(const std::vector<RangeStats> & stats) {
    std::string s = "label,idea_count,duplication_rate,pair_count,mean_uts,steer_count,degenerate\n";
    char buf[64];
    for (const auto & r : stats) {
        s += r.label;
        s += ',';
        s += std::to_string(r.idea_count);
        s += ',';
        std::snprintf(buf, sizeof(buf), "%.17g", r.duplication_rate);
        s += buf;
        s += ',';
        s += std::to_string(r.pair_count);
        s += ',';
        std::snprintf(buf, sizeof(buf), "%.17g", r.mean_uts);
        s += buf;
        s += ',';
        s += std::to_string(r.steer_count);
        s += ',';
        s += r.degenerate ? "1" : "0";
        s += '\n';
    }
    return s;
}

std::string cluster_digest(const SweepReport & report) {
    std::string s;
    for (const auto & c : report.clusters) {
        s += "cluster ";
        s += std::to_string(c.id);
        s += " [";
        s += std::to_string(c.members.size());
        s += " outputs] ";
        s += report.cells[c.representative].trace.text();
        s += '\n';
    }
    return s;
}

} // namespace helix
