#pragma once

#include "osfp/session.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace osfp {

struct WeightedFingerprint {
    Fingerprint fp;
    double p = 0.0;
};

/// One simulated operating system population.
struct OsProfile {
    CategoryLabel label{"unnamed"};
    std::uint64_t host_count = 0;
    /// Sessions per active hour follow a lognormal with this median and
    /// log-space sigma, drawn once per host.
    double rate_median = 20.0;
    double rate_sigma = 0.5;
    /// Probability that a session carries a SYN / a ClientHello / an HTTP
    /// request. TLS and HTTP are exclusive within one session.
    double p_tcp = 1.0;
    double p_tls = 0.5;
    double p_http = 0.1;
    /// Fraction of hosts that issue plain HTTP at all.
    double http_host_fraction = 1.0;
    /// Distinct fingerprints each host draws from the profile per protocol.
    std::array<std::size_t, 3> host_pool{1, 1, 1};
    std::array<std::vector<WeightedFingerprint>, 3> fingerprints;
};

struct ActivityModel {
    double day_active_prob = 0.8;
    double block_hours_min = 2.0;
    double block_hours_max = 6.0;
    double block_start_min_hour = 7.0;
    double block_start_max_hour = 17.0;
};

struct CorpusSpec {
    std::vector<OsProfile> profiles;
    int days = 6;
    /// Seconds since the epoch of day 0, 00:00.
    std::int64_t start_time = 1491782400;
    std::uint64_t seed = 42;
    ActivityModel activity;

    /// Throws InvalidSpec naming the offending field.
    void validate() const;

    nlohmann::ordered_json to_json() const;
    /// Parses and validates.
    static CorpusSpec from_json(const nlohmann::json& j);
};

/// The bundled twelve-profile spec.
CorpusSpec default_spec();

/// Deterministic in spec (seed included); sorted by (start_time, key).
std::vector<SessionRecord> generate(const CorpusSpec& spec);

struct CorpusSummary {
    std::uint64_t sessions = 0;
    std::map<std::string, std::uint64_t> hosts_per_label;
    std::map<std::string, std::uint64_t> sessions_per_label;
    std::array<std::uint64_t, 3> sessions_with{};

    nlohmann::ordered_json to_json() const;
};

CorpusSummary summarize(std::span<const SessionRecord> sessions);

/// SHA-256 of the corpus serialized as JSON Lines.
std::string corpus_hash(std::span<const SessionRecord> sessions);

} // namespace osfp
