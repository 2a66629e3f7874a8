#include "helix/manifold.hpp"

#include "helix/binio.hpp"
#include "helix/error.hpp"
#include "helix/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace helix {

namespace {

constexpr double k_ln_inv_06 = 0.51082562376599068; // ln(1/0.6)

size_t packed_size(size_t d) { return d * (d + 1) / 2; }
size_t row_offset(size_t i) { return i * (i + 1) / 2; }

void check_finite(std::span<const double> v, const char * what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw bad_input(std::string(what) + ": non-finite entry");
        }
    }
}

} // namespace

RunningStats::RunningStats(size_t dim) : mean_(dim, 0.0), m2_(packed_size(dim), 0.0) {}

void RunningStats::accumulate(std::span<const double> sample) {
    if (sample.empty()) {
        throw bad_input("accumulate: empty sample");
    }
    check_finite(sample, "accumulate");
    if (count_ == 0 && mean_.empty()) {
        mean_.assign(sample.size(), 0.0);
        m2_.assign(packed_size(sample.size()), 0.0);
    }
    const size_t d = mean_.size();
    if (sample.size() != d) {
        throw bad_input("accumulate: dimension mismatch, got " + std::to_string(sample.size()) +
                        " expected " + std::to_string(d));
    }

    ++count_;
    if (count_ == 1) {
        std::copy(sample.begin(), sample.end(), mean_.begin());
        return;
    }

    // Welford: delta against the old mean, delta2 against the new one.
    // The rank-1 m2 update is symmetric because delta2 = delta*(n-1)/n,
    // so the packed lower triangle captures it exactly.
    std::vector<double> delta(d), delta2(d);
    const double inv_n = 1.0 / double(count_);
    for (size_t i = 0; i < d; ++i) {
        delta[i] = sample[i] - mean_[i];
        mean_[i] += delta[i] * inv_n;
        delta2[i] = sample[i] - mean_[i];
    }
    for (size_t i = 0; i < d; ++i) {
        kern::axpy(delta[i], delta2.data(), m2_.data() + row_offset(i), i + 1);
    }
}

void RunningStats::merge(const RunningStats & other) {
    if (other.count_ == 0) {
        return;
    }
    if (count_ == 0) {
        *this = other;
        return;
    }
    const size_t d = mean_.size();
    if (other.mean_.size() != d) {
        throw bad_input("merge: dimension mismatch");
    }

    const double na = double(count_);
    const double nb = double(other.count_);
    const double n = na + nb;
    std::vector<double> delta(d);
    for (size_t i = 0; i < d; ++i) {
        delta[i] = other.mean_[i] - mean_[i];
        mean_[i] += delta[i] * (nb / n);
    }
    const double w = na * nb / n;
    for (size_t k = 0; k < m2_.size(); ++k) {
        m2_[k] += other.m2_[k];
    }
    for (size_t i = 0; i < d; ++i) {
        kern::axpy(w * delta[i], delta.data(), m2_.data() + row_offset(i), i + 1);
    }
    count_ += other.count_;
}

LayerManifold finalize(const RunningStats & stats, uint32_t layer_id, double lambda) {
    if (stats.count() < 2) {
        throw numerical("finalize: need at least 2 samples, have " + std::to_string(stats.count()));
    }
    if (!(lambda > 0.0)) {
        throw bad_input("finalize: lambda must be > 0");
    }
    const size_t d = stats.dim();
    const double inv = 1.0 / double(stats.count() - 1);

    // cov = m2/(n-1) + lambda*I, factorized in place (packed row-major).
    std::vector<double> a(stats.m2_packed());
    for (auto & x : a) {
        x *= inv;
    }
    for (size_t i = 0; i < d; ++i) {
        a[row_offset(i) + i] += lambda;
    }

    for (size_t i = 0; i < d; ++i) {
        double * row_i = a.data() + row_offset(i);
        for (size_t j = 0; j < i; ++j) {
            const double * row_j = a.data() + row_offset(j);
            const double s = row_i[j] - kern::dot(row_i, row_j, j);
            row_i[j] = s / row_j[j];
        }
        const double s = row_i[i] - kern::sum_sq(row_i, i);
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw numerical("finalize: covariance not positive definite at pivot " +
                            std::to_string(i) + "; try a larger lambda than " +
                            std::to_string(lambda));
        }
        row_i[i] = std::sqrt(s);
    }

    LayerManifold lm;
    lm.layer_id = layer_id;
    lm.mean = stats.mean();
    lm.chol_packed = std::move(a);
    lm.lambda = lambda;
    lm.d_ref = 1.0;
    lm.sample_count = stats.count();
    return lm;
}

double mahalanobis(const LayerManifold & lm, std::span<const double> h) {
    const size_t d = lm.dim();
    if (h.size() != d) {
        throw bad_input("mahalanobis: dimension mismatch, got " + std::to_string(h.size()) +
                        " expected " + std::to_string(d));
    }
    check_finite(h, "mahalanobis");

    // Forward solve L y = (h - mean); D = ||y||.
    std::vector<double> y(d);
    for (size_t i = 0; i < d; ++i) {
        const double * row = lm.chol_packed.data() + row_offset(i);
        const double s = (h[i] - lm.mean[i]) - kern::dot(row, y.data(), i);
        y[i] = s / row[i];
    }
    return std::sqrt(kern::sum_sq(y.data(), d));
}

void calibrate_dref(LayerManifold & lm, std::span<const double> held_out_distances) {
    if (held_out_distances.empty()) {
        throw bad_input("calibrate_dref: empty held-out set");
    }
    std::vector<double> sorted(held_out_distances.begin(), held_out_distances.end());
    std::sort(sorted.begin(), sorted.end());
    const size_t n = sorted.size();
    const size_t rank = size_t(std::ceil(0.6827 * double(n)));
    const double q68 = sorted[rank > 0 ? rank - 1 : 0];
    if (!(q68 > 0.0)) {
        throw numerical("calibrate_dref: degenerate held-out distances (q68 = 0)");
    }
    lm.d_ref = q68 / k_ln_inv_06;
}

void calibrate_dref(LayerManifold & lm, const std::vector<std::vector<double>> & held_out) {
    std::vector<double> dist;
    dist.reserve(held_out.size());
    for (const auto & h : held_out) {
        dist.push_back(mahalanobis(lm, h));
    }
    calibrate_dref(lm, dist);
}

const LayerManifold * Manifold::find(uint32_t layer_id) const {
    for (const auto & lm : layers) {
        if (lm.layer_id == layer_id) {
            return &lm;
        }
    }
    return nullptr;
}

void Manifold::add(LayerManifold lm) {
    if (find(lm.layer_id)) {
        throw bad_input("manifold: duplicate layer id " + std::to_string(lm.layer_id));
    }
    layers.push_back(std::move(lm));
    std::sort(layers.begin(), layers.end(),
              [](const LayerManifold & a, const LayerManifold & b) { return a.layer_id < b.layer_id; });
}

std::vector<uint8_t> serialize_manifold(const Manifold & m) {
    byte_writer w;
    w.bytes("HLXM", 4);
    w.u32(1);
    w.u32(uint32_t(m.layers.size()));
    for (const auto & lm : m.layers) {
        w.u32(lm.layer_id);
        w.u32(uint32_t(lm.dim()));
        w.f64(lm.lambda);
        w.f64(lm.d_ref);
        w.u64(lm.sample_count);
        w.bytes(lm.mean.data(), lm.mean.size() * sizeof(double));
        w.bytes(lm.chol_packed.data(), lm.chol_packed.size() * sizeof(double));
    }
    w.u32(crc32(w.buf.data(), w.buf.size()));
    return std::move(w.buf);
}

Manifold deserialize_manifold(const std::vector<uint8_t> & bytes) {
    if (bytes.size() < 12 + 4) {
        throw bad_input("manifold file: truncated header");
    }
    if (std::memcmp(bytes.data(), "HLXM", 4) != 0) {
        throw bad_input("manifold file: bad magic (not an HLXM file)");
    }
    const uint32_t stored_crc = uint32_t(bytes[bytes.size() - 4]) |
                                uint32_t(bytes[bytes.size() - 3]) << 8 |
                                uint32_t(bytes[bytes.size() - 2]) << 16 |
                                uint32_t(bytes[bytes.size() - 1]) << 24;
    const uint32_t actual_crc = crc32(bytes.data(), bytes.size() - 4);
    if (stored_crc != actual_crc) {
        throw bad_input("manifold file: checksum mismatch (corrupt payload)");
    }

    byte_reader r(bytes.data(), bytes.size() - 4);
    r.pos = 4;
    uint32_t version = 0, layer_count = 0;
    r.u32(version);
    if (version != 1) {
        throw bad_input("manifold file: unsupported version " + std::to_string(version));
    }
    r.u32(layer_count);

    Manifold m;
    m.meta.format_version = version;
    for (uint32_t li = 0; li < layer_count; ++li) {
        LayerManifold lm;
        uint32_t d = 0;
        if (!r.u32(lm.layer_id) || !r.u32(d) || !r.f64(lm.lambda) || !r.f64(lm.d_ref) ||
            !r.u64(lm.sample_count)) {
            throw bad_input("manifold file: truncated at layer " + std::to_string(li));
        }
        lm.mean.resize(d);
        lm.chol_packed.resize(packed_size(d));
        const size_t mean_bytes = size_t(d) * sizeof(double);
        const size_t chol_bytes = lm.chol_packed.size() * sizeof(double);
        if (!r.remaining(mean_bytes + chol_bytes)) {
            throw bad_input("manifold file: truncated at layer " + std::to_string(li));
        }
        std::memcpy(lm.mean.data(), r.data + r.pos, mean_bytes);
        r.pos += mean_bytes;
        std::memcpy(lm.chol_packed.data(), r.data + r.pos, chol_bytes);
        r.pos += chol_bytes;
        m.add(std::move(lm));
    }
    if (r.pos != r.size) {
        throw bad_input("manifold file: trailing bytes after last layer");
    }
    return m;
}

void save_manifold(const Manifold & m, const std::string & path) {
    write_file_bytes(path, serialize_manifold(m));
}

Manifold load_manifold(const std::string & path) {
    return deserialize_manifold(read_file_bytes(path));
}

} // namespace helix
