#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace helix {

// Lossless projection of a TokenDecision, one JSONL object per token.
struct TelemetryRecord {
    int step = 0;
    int token_id = 0;
    double entropy_nats = 0.0;
    double s_e = 0.0;
    double s_d = 0.0;
    double beta_t = 0.0;
    double uts = 0.0;
    double tau_t = 0.0;
    std::map<uint32_t, double> d_layers;
    bool steered = false;
    double penalty = 0.0;
    double temperature = 0.0;
    int stream_id = 0;
};

// Serializes with fixed key order and %.17g floats so a parse reproduces
// every field exactly.
std::string to_jsonl(const TelemetryRecord & rec);
TelemetryRecord parse_jsonl(const std::string & line); // throws bad_input

struct SummaryStats {
    uint64_t token_count = 0;
    double mean_uts = 0.0;
    double mean_entropy = 0.0;
    double steering_rate = 0.0;
    double min_uts = 0.0;
    uint64_t steered_count = 0;
};

// Exact means and rates. Throws bad_input on an empty record set.
SummaryStats aggregate(const std::vector<TelemetryRecord> & records);

// Telemetry sinks must never abort generation: write failures flip the sink
// into a degraded state that callers observe and report, nothing more.
class TelemetrySink {
  public:
    virtual ~TelemetrySink() = default;
    // Returns false on failure (sink is then degraded).
    virtual bool write_line(const std::string & line) = 0;
    virtual void flush() {}
};

// Append-only file sink. Opens with exclusive-create semantics so two
// streams cannot silently share one path.
class FileSink : public TelemetrySink {
  public:
    explicit FileSink(const std::string & path); // throws io_error
    ~FileSink() override;
    bool write_line(const std::string & line) override;
    void flush() override;

  private:
    FILE * f_ = nullptr;
};

class StdoutSink : public TelemetrySink {
  public:
    bool write_line(const std::string & line) override;
    void flush() override;
};

class MemorySink : public TelemetrySink {
  public:
    bool write_line(const std::string & line) override;
    const std::vector<std::string> & lines() const { return lines_; }

  private:
    std::vector<std::string> lines_;
};

// Test double: fails after `fail_after` successful writes.
class FailingSink : public TelemetrySink {
  public:
    explicit FailingSink(int fail_after) : fail_after_(fail_after) {}
    bool write_line(const std::string & line) override;
    int writes_accepted() const { return accepted_; }

  private:
    int fail_after_;
    int accepted_ = 0;
};

// Serializes records from many concurrent streams into one underlying sink.
class MuxSink : public TelemetrySink {
  public:
    explicit MuxSink(TelemetrySink & inner) : inner_(inner) {}
    bool write_line(const std::string & line) override;
    void flush() override;

  private:
    TelemetrySink & inner_;
    std::mutex mu_;
};

// Mean-UTS views over whole traces.
struct TraceSummary {
    std::string label;
    double mean_uts = 0.0;
    uint64_t token_count = 0;
};

// Traces whose mean UTS falls below the threshold, ascending by mean UTS.
std::vector<TraceSummary> filter_by_uts(const std::vector<TraceSummary> & traces, double threshold);

} // namespace helix
