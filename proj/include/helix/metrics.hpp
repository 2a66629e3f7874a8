#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace helix {

// Pairwise text similarity in [0,1]; symmetric, sim(x,x) = 1.
class SimilarityProvider {
  public:
    virtual ~SimilarityProvider() = default;
    virtual double sim(const std::string & a, const std::string & b) const = 0;
    virtual std::string id() const = 0;
};

// Default provider: Jaccard overlap of lowercase word n-gram sets.
// Texts shorter than n words fall back to unigram sets. Empty vs empty is
// 1.0, empty vs non-empty is 0.0.
class NgramJaccard : public SimilarityProvider {
  public:
    explicit NgramJaccard(int n = 2) : n_(n) {}
    double sim(const std::string & a, const std::string & b) const override;
    std::string id() const override { return "jaccard-" + std::to_string(n_) + "gram"; }

  private:
    int n_;
};

double ngram_jaccard(const std::string & a, const std::string & b, int n);

// Perplexity oracle; > 0 and finite for non-empty text. Failures throw.
class PerplexityProvider {
  public:
    virtual ~PerplexityProvider() = default;
    virtual double ppl(const std::string & text) const = 0;
    virtual std::string id() const = 0;
};

// Deterministic stand-in for an external LM judge: repetitive or degenerate
// text scores high pseudo-perplexity, varied text scores low.
class StubPerplexity : public PerplexityProvider {
  public:
    double ppl(const std::string & text) const override;
    std::string id() const override { return "stub-ppl"; }
};

// Fixed value table, for tests. Unknown text throws.
class TablePerplexity : public PerplexityProvider {
  public:
    void set(const std::string & text, double value) { table_[text] = value; }
    double ppl(const std::string & text) const override;
    std::string id() const override { return "table-ppl"; }

  private:
    std::map<std::string, double> table_;
};

// Semantic Area Coverage: fraction of output pairs with sim < theta_dup.
// Computed over unordered pairs; identical to the ordered-pair definition
// by symmetry of sim. Throws on fewer than two outputs.
double sac(const std::vector<std::string> & outputs,
           const SimilarityProvider & provider,
           double theta_dup = 0.7);

// Logical Coherence: fraction of outputs with ppl < tau_ppl. A provider
// failure counts that output incoherent (fail-closed) and is logged to the
// optional callback.
double lc(const std::vector<std::string> & outputs,
          const PerplexityProvider & provider,
          double tau_ppl = 15.0,
          const std::function<void(size_t, const std::string &)> & on_failure = nullptr);

double mean_ppl(const std::vector<std::string> & outputs, const PerplexityProvider & provider);

// One row of the metrics CSV (columns: temperature, n, sac, lc, mean_ppl,
// provider_id, theta_dup, tau_ppl).
struct MetricsRow {
    double temperature = 0.0;
    size_t n = 0;
    double sac_value = 0.0; // NaN when undefined (n < 2)
    double lc_value = 0.0;
    double mean_ppl_value = 0.0;
    std::string provider_id;
    double theta_dup = 0.7;
    double tau_ppl = 15.0;
};

std::string metrics_csv(const std::vector<MetricsRow> & rows);

} // namespace helix
