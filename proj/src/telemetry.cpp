#include "helix/telemetry.hpp"

#include "helix/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cinttypes>
#include <cstdio>
#include <fcntl.h>
#include <unistd.h>

namespace helix {

namespace {

// %.17g round-trips every finite double exactly.
void append_f64(std::string & s, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    s += buf;
}

} // namespace

std::string to_jsonl(const TelemetryRecord & rec) {
    std::string s;
    s.reserve(256);
    s += "{\"step\":";
    s += std::to_string(rec.step);
    s += ",\"token_id\":";
    s += std::to_string(rec.token_id);
    s += ",\"entropy_nats\":";
    append_f64(s, rec.entropy_nats);
    s += ",\"s_e\":";
    append_f64(s, rec.s_e);
    s += ",\"s_d\":";
    append_f64(s, rec.s_d);
    s += ",\"beta_t\":";
    append_f64(s, rec.beta_t);
    s += ",\"uts\":";
    append_f64(s, rec.uts);
    s += ",\"tau_t\":";
    append_f64(s, rec.tau_t);
    s += ",\"d_layers\":{";
    bool first = true;
    for (const auto & [layer, d] : rec.d_layers) {
        if (!first) s += ',';
        first = false;
        s += '"';
        s += std::to_string(layer);
        s += "\":";
        append_f64(s, d);
    }
    s += "},\"steered\":";
    s += rec.steered ? "true" : "false";
    s += ",\"penalty\":";
    append_f64(s, rec.penalty);
    s += ",\"temperature\":";
    append_f64(s, rec.temperature);
    s += ",\"stream_id\":";
    s += std::to_string(rec.stream_id);
    s += '}';
    return s;
}

TelemetryRecord parse_jsonl(const std::string & line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception & e) {
        throw bad_input(std::string("telemetry parse: ") + e.what());
    }
    try {
        TelemetryRecord rec;
        rec.step = j.at("step").get<int>();
        rec.token_id = j.at("token_id").get<int>();
        rec.entropy_nats = j.at("entropy_nats").get<double>();
        rec.s_e = j.at("s_e").get<double>();
        rec.s_d = j.at("s_d").get<double>();
        rec.beta_t = j.at("beta_t").get<double>();
        rec.uts = j.at("uts").get<double>();
        rec.tau_t = j.at("tau_t").get<double>();
        for (const auto & [key, val] : j.at("d_layers").items()) {
            rec.d_layers[uint32_t(std::stoul(key))] = val.get<double>();
        }
        rec.steered = j.at("steered").get<bool>();
        rec.penalty = j.at("penalty").get<double>();
        rec.temperature = j.at("temperature").get<double>();
        rec.stream_id = j.value("stream_id", 0);
        return rec;
    } catch (const nlohmann::json::exception & e) {
        throw bad_input(std::string("telemetry schema: ") + e.what());
    }
}

SummaryStats aggregate(const std::vector<TelemetryRecord> & records) {
    if (records.empty()) {
        throw bad_input("aggregate: empty record set");
    }
    SummaryStats s;
    s.token_count = records.size();
    s.min_uts = records.front().uts;
    double uts_sum = 0.0, ent_sum = 0.0;
    for (const auto & r : records) {
        uts_sum += r.uts;
        ent_sum += r.entropy_nats;
        s.min_uts = std::min(s.min_uts, r.uts);
        if (r.steered) ++s.steered_count;
    }
    s.mean_uts = uts_sum / double(s.token_count);
    s.mean_entropy = ent_sum / double(s.token_count);
    s.steering_rate = double(s.steered_count) / double(s.token_count);
    return s;
}

FileSink::FileSink(const std::string & path) {
    // O_EXCL: two streams must never share one telemetry path.
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
    if (fd < 0) {
        throw io_error("telemetry sink: cannot create " + path +
                       (errno == EEXIST ? " (already exists)" : ""));
    }
    f_ = ::fdopen(fd, "w");
    if (!f_) {
        ::close(fd);
        throw io_error("telemetry sink: fdopen failed for " + path);
    }
}

FileSink::~FileSink() {
    if (f_) {
        std::fclose(f_);
    }
}

bool FileSink::write_line(const std::string & line) {
    if (!f_) return false;
    if (std::fwrite(line.data(), 1, line.size(), f_) != line.size() || std::fputc('\n', f_) == EOF) {
        return false;
    }
    return true;
}

void FileSink::flush() {
    if (f_) std::fflush(f_);
}

bool StdoutSink::write_line(const std::string & line) {
    return std::fwrite(line.data(), 1, line.size(), stdout) == line.size() &&
           std::fputc('\n', stdout) != EOF;
}

void StdoutSink::flush() {
    std::fflush(stdout);
}

bool MemorySink::write_line(const std::string & line) {
    lines_.push_back(line);
    return true;
}

bool FailingSink::write_line(const std::string & line) {
    (void)line;
    if (accepted_ >= fail_after_) {
        return false;
    }
    ++accepted_;
    return true;
}

bool MuxSink::write_line(const std::string & line) {
    std::lock_guard<std::mutex> lock(mu_);
    return inner_.write_line(line);
}

void MuxSink::flush() {
    std::lock_guard<std::mutex> lock(mu_);
    inner_.flush();
}

std::vector<TraceSummary> filter_by_uts(const std::vector<TraceSummary> & traces, double threshold) {
    std::vector<TraceSummary> flagged;
    for (const auto & t : traces) {
        if (t.mean_uts < threshold) {
            flagged.push_back(t);
        }
    }
    std::stable_sort(flagged.begin(), flagged.end(),
                     [](const TraceSummary & a, const TraceSummary & b) { return a.mean_uts < b.mean_uts; });
    return flagged;
}

} // namespace helix
