#include "helix/backend.hpp"

#include "helix/binio.hpp"
#include "helix/error.hpp"

#include <cstring>

namespace helix {

namespace {
constexpr size_t k_header_size = 4 + 4 + 4 + 4; // magic, version, V, layer_count
}

TraceWriter::TraceWriter(uint32_t vocab_size, uint32_t layer_count)
    : vocab_size_(vocab_size), layer_count_(layer_count) {
    byte_writer w;
    w.bytes("HLXT", 4);
    w.u32(1);
    w.u32(vocab_size_);
    w.u32(layer_count_);
    buf_ = std::move(w.buf);
}

void TraceWriter::append(const StepOutput & out) {
    if (out.logits.size() != vocab_size_) {
        throw bad_input("trace writer: logits length mismatch");
    }
    if (out.hidden.size() != layer_count_) {
        throw bad_input("trace writer: layer count mismatch");
    }
    byte_writer body;
    for (double z : out.logits) {
        body.f32(float(z));
    }
    for (const auto & [layer, h] : out.hidden) {
        body.u32(layer);
        body.u32(uint32_t(h.size()));
        for (double x : h) {
            body.f32(float(x));
        }
    }
    body.u8(out.is_end ? 1 : 0);

    byte_writer rec;
    rec.u32(uint32_t(body.buf.size()));
    buf_.insert(buf_.end(), rec.buf.begin(), rec.buf.end());
    buf_.insert(buf_.end(), body.buf.begin(), body.buf.end());
}

std::vector<uint8_t> TraceWriter::bytes() const {
    return buf_;
}

void TraceWriter::write(const std::string & path) const {
    write_file_bytes(path, buf_);
}

ReplayBackend::ReplayBackend(const std::string & path) : bytes_(read_file_bytes(path)) {
    parse_header();
}

ReplayBackend::ReplayBackend(std::vector<uint8_t> bytes) : bytes_(std::move(bytes)) {
    parse_header();
}

void ReplayBackend::parse_header() {
    if (bytes_.size() < k_header_size) {
        throw bad_input("trace file: truncated header");
    }
    if (std::memcmp(bytes_.data(), "HLXT", 4) != 0) {
        throw bad_input("trace file: bad magic (not an HLXT file)");
    }
    byte_reader r(bytes_.data(), bytes_.size());
    r.pos = 4;
    uint32_t version = 0;
    r.u32(version);
    if (version != 1) {
        throw bad_input("trace file: unsupported version " + std::to_string(version));
    }
    r.u32(vocab_size_);
    r.u32(layer_count_);
    if (vocab_size_ < 2) {
        throw bad_input("trace file: vocab_size must be >= 2");
    }
    pos_ = r.pos;

    // Layer ids come from the first record, if any.
    if (pos_ < bytes_.size()) {
        byte_reader peek(bytes_.data(), bytes_.size());
        peek.pos = pos_;
        uint32_t len = 0;
        if (peek.u32(len) && peek.remaining(len)) {
            peek.pos += size_t(vocab_size_) * 4;
            for (uint32_t l = 0; l < layer_count_; ++l) {
                uint32_t layer = 0, d = 0;
                if (!peek.u32(layer) || !peek.u32(d) || !peek.remaining(size_t(d) * 4)) {
                    break;
                }
                layer_ids_.push_back(layer);
                peek.pos += size_t(d) * 4;
            }
        }
    }
}

StepOutput ReplayBackend::step(int sampled_token, double temperature) {
    (void)sampled_token;
    (void)temperature;
    StepOutput out;
    if (exhausted_ || pos_ >= bytes_.size()) {
        out.is_end = true;
        return out;
    }

    byte_reader r(bytes_.data(), bytes_.size());
    r.pos = pos_;
    const std::string at = "trace file: malformed record " + std::to_string(next_index_);
    uint32_t len = 0;
    if (!r.u32(len) || !r.remaining(len)) {
        throw bad_input(at + " (truncated)");
    }
    const size_t record_end = r.pos + len;

    out.logits.resize(vocab_size_);
    if (!r.remaining(size_t(vocab_size_) * 4)) {
        throw bad_input(at + " (logits truncated)");
    }
    for (uint32_t i = 0; i < vocab_size_; ++i) {
        float f;
        r.f32(f);
        out.logits[i] = double(f);
    }
    for (uint32_t l = 0; l < layer_count_; ++l) {
        uint32_t layer = 0, d = 0;
        if (!r.u32(layer) || !r.u32(d) || !r.remaining(size_t(d) * 4)) {
            throw bad_input(at + " (hidden state truncated)");
        }
        auto & h = out.hidden[layer];
        h.resize(d);
        for (uint32_t i = 0; i < d; ++i) {
            float f;
            r.f32(f);
            h[i] = double(f);
        }
    }
    uint8_t end_flag = 0;
    if (!r.u8(end_flag) || r.pos != record_end) {
        throw bad_input(at + " (bad record length)");
    }
    out.is_end = end_flag != 0;

    pos_ = record_end;
    ++next_index_;
    if (out.is_end) {
        exhausted_ = true;
    }
    return out;
}

} // namespace helix
