#pragma once

#include "osfp/count_store.hpp"
#include "osfp/session.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace osfp {

using Distribution = std::map<CategoryLabel, double>;

struct PriorDistribution {
    Distribution probs;
};

enum class PosteriorMode { empirical, bayes_uniform_likelihood };

PosteriorMode posterior_mode_from_string(std::string_view s);

struct PosteriorRow {
    std::string fingerprint;
    /// p(f)
    double p_f = 0.0;
    /// Normalization factor: prior mass of the assignment set.
    double n_f = 0.0;
    Distribution probs;
};

struct PosteriorTable {
    std::vector<PosteriorRow> rows;
};

struct FingerprintGain {
    std::string fingerprint;
    double d_kl = 0.0;
    double normalized_gain = 0.0;
    std::uint64_t count = 0;
};

struct InfoGainReport {
    double h_prior = 0.0;
    double h_posterior = 0.0;
    double gain = 0.0;
    /// Gain evaluated as the p(f)-weighted sum of KL divergences.
    double gain_kl = 0.0;
    std::uint64_t total = 0;
    std::vector<FingerprintGain> per_fingerprint;

    nlohmann::ordered_json to_json() const;
};

PriorDistribution estimate_prior(const CountStore& store);

/// Empirical mode: joint(f,c)/count(f), optionally with additive smoothing
/// `alpha` over the store's label set. Bayes mode: prior renormalized over
/// the assignment set of f.
PosteriorTable posterior(const CountStore& store, PosteriorMode mode = PosteriorMode::empirical,
                         double alpha = 0.0);

double entropy(const Distribution& p);
inline double entropy(const PriorDistribution& p) { return entropy(p.probs); }
double conditional_entropy(const PosteriorTable& table);
double kl_divergence(const Distribution& p, const Distribution& q);

/// Throws InconsistentStore if the two gain forms disagree by more than 1e-9.
InfoGainReport information_gain(const CountStore& store);

/// Top-k by normalized gain, descending; ties by fingerprint ascending.
std::vector<FingerprintGain> top_fingerprints_by_gain(const CountStore& store, std::size_t k);

enum class CountUnit { flow, host, window };

CountUnit count_unit_from_string(std::string_view s);
std::string to_string(CountUnit u);

/// Counts labeled sessions carrying `protocol` into a store. Host units count
/// each (host, fingerprint) pair once; window units count each (host, window)
/// once under the composite key of the fingerprints seen in it.
CountStore count_sessions(std::span<const SessionRecord> sessions, Protocol protocol, CountUnit unit,
                          double window_seconds = 3600.0);

struct InfoGainRow {
    std::string data_type;
    InfoGainReport report;
};

/// data type, H(C), H(C|F), I(C;F)
std::string table1_csv(std::span<const InfoGainRow> rows);
/// fingerprint, normalized gain
std::string table2_csv(std::span<const FingerprintGain> rows);

} // namespace osfp
