#include "helix/metrics.hpp"

#include "helix/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace helix {

namespace {

std::vector<std::string> words_lower(const std::string & text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur += char(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    if (!cur.empty()) {
        out.push_back(cur);
    }
    return out;
}

std::set<std::string> ngram_set(const std::vector<std::string> & words, int n) {
    std::set<std::string> grams;
    if (int(words.size()) < n) {
        // Too short for n-grams: fall back to unigrams.
        grams.insert(words.begin(), words.end());
        return grams;
    }
    for (size_t i = 0; i + size_t(n) <= words.size(); ++i) {
        std::string g = words[i];
        for (int k = 1; k < n; ++k) {
            g += '\x1f';
            g += words[i + size_t(k)];
        }
        grams.insert(std::move(g));
    }
    return grams;
}

void append_csv_double(std::string & s, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    s += buf;
}

} // namespace

double ngram_jaccard(const std::string & a, const std::string & b, int n) {
    if (n < 1) {
        throw bad_input("ngram_jaccard: n must be >= 1");
    }
    const auto wa = words_lower(a);
    const auto wb = words_lower(b);
    if (wa.empty() && wb.empty()) {
        return 1.0;
    }
    if (wa.empty() || wb.empty()) {
        return 0.0;
    }
    const auto ga = ngram_set(wa, n);
    const auto gb = ngram_set(wb, n);
    size_t inter = 0;
    for (const auto & g : ga) {
        if (gb.count(g)) ++inter;
    }
    const size_t uni = ga.size() + gb.size() - inter;
    return uni == 0 ? 1.0 : double(inter) / double(uni);
}

double NgramJaccard::sim(const std::string & a, const std::string & b) const {
    return ngram_jaccard(a, b, n_);
}

double StubPerplexity::ppl(const std::string & text) const {
    const auto words = words_lower(text);
    if (words.empty()) {
        throw bad_input("stub perplexity: empty text");
    }
    // Repetitive text has few distinct bigrams relative to its length;
    // push it above the usual coherence threshold.
    std::set<std::string> bigrams;
    for (size_t i = 0; i + 1 < words.size(); ++i) {
        bigrams.insert(words[i] + '\x1f' + words[i + 1]);
    }
    const double pairs = words.size() > 1 ? double(words.size() - 1) : 1.0;
    const double richness = words.size() > 1 ? double(bigrams.size()) / pairs : 1.0;
    return 3.0 + 25.0 * (1.0 - richness) + 10.0 / double(1 + words.size());
}

double TablePerplexity::ppl(const std::string & text) const {
    auto it = table_.find(text);
    if (it == table_.end()) {
        throw bad_input("table perplexity: no entry for text");
    }
    return it->second;
}

double sac(const std::vector<std::string> & outputs,
           const SimilarityProvider & provider,
           double theta_dup) {
    const size_t n = outputs.size();
    if (n < 2) {
        throw bad_input("sac: need at least 2 outputs");
    }
    size_t below = 0;
    size_t pairs = 0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            ++pairs;
            if (provider.sim(outputs[i], outputs[j]) < theta_dup) {
                ++below;
            }
        }
    }
    return double(below) / double(pairs);
}

double lc(const std::vector<std::string> & outputs,
          const PerplexityProvider & provider,
          double tau_ppl,
          const std::function<void(size_t, const std::string &)> & on_failure) {
    if (outputs.empty()) {
        throw bad_input("lc: need at least 1 output");
    }
    size_t coherent = 0;
    for (size_t i = 0; i < outputs.size(); ++i) {
        try {
            if (provider.ppl(outputs[i]) < tau_ppl) {
                ++coherent;
            }
        } catch (const std::exception & e) {
            // Fail closed: a provider failure counts as incoherent.
            if (on_failure) {
                on_failure(i, e.what());
            }
        }
    }
    return double(coherent) / double(outputs.size());
}

double mean_ppl(const std::vector<std::string> & outputs, const PerplexityProvider & provider) {
    if (outputs.empty()) {
        throw bad_input("mean_ppl: empty output set");
    }
    double sum = 0.0;
    size_t ok = 0;
    for (const auto & o : outputs) {
        try {
            sum += provider.ppl(o);
            ++ok;
        } catch (const std::exception &) {
        }
    }
    return ok > 0 ? sum / double(ok) : std::nan("");
}

std::string metrics_csv(const std::vector<MetricsRow> & rows) {
    std::string s = "temperature,n,sac,lc,mean_ppl,provider_id,theta_dup,tau_ppl\n";
    for (const auto & r : rows) {
        append_csv_double(s, r.temperature);
        s += ',';
        s += std::to_string(r.n);
        s += ',';
        append_csv_double(s, r.sac_value);
        s += ',';
        append_csv_double(s, r.lc_value);
        s += ',';
        append_csv_double(s, r.mean_ppl_value);
        s += ',';
        s += r.provider_id;
        s += ',';
        append_csv_double(s, r.theta_dup);
        s += ',';
        append_csv_double(s, r.tau_ppl);
        s += '\n';
    }
    return s;
}

} // namespace helix
