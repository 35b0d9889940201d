#pragma once

#include "osfp/multi_session.hpp"
#include "osfp/rng.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace osfp {

using ObfuscationMapping = std::map<CategoryLabel, CategoryLabel>;

/// Distinct hosts per label.
std::map<CategoryLabel, std::uint64_t> host_counts(std::span<const SessionRecord> sessions);

/// Windows labels go to the Apple label with the most hosts, Apple labels to
/// the Windows label with the most hosts (ties: smallest label). Labels of
/// neither family stay unmapped. Throws MissingFamily if either family is
/// absent.
ObfuscationMapping build_cross_mapping(const std::map<CategoryLabel, std::uint64_t>& hosts);

/// Empirical per-(label, protocol) fingerprint distribution, weighted by
/// the number of sessions carrying each fingerprint.
class TargetSampler {
public:
    static TargetSampler from_windows(std::span<const HostWindow> windows);

    bool has_support(const CategoryLabel& label, Protocol p) const;
    /// (canonical, probability) in canonical order; empty without support.
    std::vector<std::pair<std::string, double>> distribution(const CategoryLabel& label, Protocol p) const;
    /// Throws EmptySamplerSupport when the label never showed the protocol.
    const std::string& draw(const CategoryLabel& label, Protocol p, Rng& rng) const;

private:
    struct Table {
        std::vector<std::string> fingerprints;
        std::vector<double> cumulative;
    };
    std::map<std::pair<CategoryLabel, Protocol>, Table> tables_;
};

struct ObfuscationConfig {
    double fraction = 0.0;
    ProtocolSet scope{Protocol::tcp, Protocol::tls, Protocol::http};
};

struct ObfuscationStats {
    std::uint64_t windows = 0;
    std::uint64_t replaced = 0;
    /// Replacements skipped because the target never showed that protocol.
    std::uint64_t dropped = 0;

    ObfuscationStats& operator+=(const ObfuscationStats& o)
    {
        windows += o.windows;
        replaced += o.replaced;
        dropped += o.dropped;
        return *this;
    }
};

/// Replaces ceil(fraction * k) of the window's k in-scope fingerprints,
/// chosen uniformly without replacement, with independent draws from the
/// mapped label's distribution for the same protocol. Label, host and time
/// are never changed; windows whose label is unmapped are returned as is.
HostWindow obfuscate_window(const HostWindow& window, const ObfuscationMapping& mapping,
                            const TargetSampler& sampler, const ObfuscationConfig& config, Rng& rng,
                            ObfuscationStats* stats = nullptr);

nlohmann::ordered_json mapping_to_json(const ObfuscationMapping& m);

} // namespace osfp
