#include "osfp/synth.hpp"

#include "osfp/digest.hpp"
#include "osfp/error.hpp"
#include "osfp/pseudonym.hpp"
#include "osfp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace osfp {

namespace detail {
extern const std::string_view default_spec_json;
}

namespace {

void check(bool ok, const std::string& field, const std::string& what)
{
    if (!ok)
        throw InvalidSpec(field + ": " + what);
}

bool probability(double p) { return p >= 0.0 && p <= 1.0; }

} // namespace

void CorpusSpec::validate() const
{
    check(days >= 1, "days", "must be at least 1");
    check(start_time >= 0, "start_time", "must be non-negative");
    const auto& a = activity;
    check(probability(a.day_active_prob), "activity.day_active_prob", "must lie in [0, 1]");
    check(a.block_hours_min > 0 && a.block_hours_min <= a.block_hours_max, "activity.block_hours",
          "need 0 < min <= max");
    check(a.block_start_min_hour >= 0 && a.block_start_min_hour <= a.block_start_max_hour &&
              a.block_start_max_hour + a.block_hours_max <= 24.0,
          "activity.block_start", "blocks must fit within the day");
    std::size_t populated = 0;
    std::set<CategoryLabel> labels;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const auto& p = profiles[i];
        const std::string f = "profiles[" + std::to_string(i) + "]";
        check(labels.insert(p.label).second, f + ".label", "duplicate label " + p.label.str());
        populated += p.host_count > 0;
        check(p.rate_median > 0 && std::isfinite(p.rate_median), f + ".flows_per_active_hour.median",
              "must be positive");
        check(p.rate_sigma >= 0 && std::isfinite(p.rate_sigma), f + ".flows_per_active_hour.sigma",
              "must be non-negative");
        check(probability(p.p_tcp), f + ".presence.tcp", "must lie in [0, 1]");
        check(probability(p.p_tls), f + ".presence.tls", "must lie in [0, 1]");
        check(probability(p.p_http), f + ".presence.http", "must lie in [0, 1]");
        check(p.p_tls + p.p_http <= 1.0 + 1e-12, f + ".presence", "tls + http must not exceed 1");
        check(probability(p.http_host_fraction), f + ".http_host_fraction", "must lie in [0, 1]");
        for (auto proto : all_protocols) {
            const auto& dist = p.fingerprints[static_cast<std::size_t>(proto)];
            const std::string g = f + ".fingerprints." + std::string(to_string(proto));
            check(!dist.empty(), g, "distribution is empty");
            check(p.host_pool[static_cast<std::size_t>(proto)] >= 1, f + ".host_pool." + std::string(to_string(proto)),
                  "must be at least 1");
            double sum = 0.0;
            std::set<std::string> seen;
            for (const auto& w : dist) {
                check(w.fp.protocol() == proto, g, "fingerprint of another protocol: " + w.fp.canonical());
                check(w.p > 0 && std::isfinite(w.p), g, "probabilities must be positive");
                check(seen.insert(w.fp.canonical()).second, g, "duplicate fingerprint " + w.fp.canonical());
                sum += w.p;
            }
            check(std::fabs(sum - 1.0) <= 1e-6, g, "probabilities must sum to 1");
        }
    }
    check(populated >= 2, "profiles", "need at least two profiles with hosts");
}

nlohmann::ordered_json CorpusSpec::to_json() const
{
    nlohmann::ordered_json profs = nlohmann::ordered_json::array();
    for (const auto& p : profiles) {
        nlohmann::ordered_json fps;
        nlohmann::ordered_json pool;
        for (auto proto : all_protocols) {
            nlohmann::ordered_json dist = nlohmann::ordered_json::array();
            for (const auto& w : p.fingerprints[static_cast<std::size_t>(proto)])
                dist.push_back({{"fp", w.fp.canonical()}, {"p", w.p}});
            fps[std::string(to_string(proto))] = std::move(dist);
            pool[std::string(to_string(proto))] = p.host_pool[static_cast<std::size_t>(proto)];
        }
        profs.push_back({{"label", p.label.str()},
                         {"host_count", p.host_count},
                         {"flows_per_active_hour", {{"median", p.rate_median}, {"sigma", p.rate_sigma}}},
                         {"presence", {{"tcp", p.p_tcp}, {"tls", p.p_tls}, {"http", p.p_http}}},
                         {"http_host_fraction", p.http_host_fraction},
                         {"host_pool", std::move(pool)},
                         {"fingerprints", std::move(fps)}});
    }
    return {{"days", days},
            {"start_time", start_time},
            {"seed", seed},
            {"activity",
             {{"day_active_prob", activity.day_active_prob},
              {"block_hours_min", activity.block_hours_min},
              {"block_hours_max", activity.block_hours_max},
              {"block_start_min_hour", activity.block_start_min_hour},
              {"block_start_max_hour", activity.block_start_max_hour}}},
            {"profiles", std::move(profs)}};
}

CorpusSpec CorpusSpec::from_json(const nlohmann::json& j)
{
    CorpusSpec s;
    std::string field = "(root)";
    try {
        check(j.is_object(), field, "spec must be a JSON object");
        field = "days";
        s.days = j.value("days", 6);
        field = "start_time";
        s.start_time = j.value("start_time", std::int64_t{1491782400});
        field = "seed";
        s.seed = j.value("seed", std::uint64_t{42});
        if (j.contains("activity")) {
            field = "activity";
            const auto& a = j.at("activity");
            s.activity.day_active_prob = a.value("day_active_prob", s.activity.day_active_prob);
            s.activity.block_hours_min = a.value("block_hours_min", s.activity.block_hours_min);
            s.activity.block_hours_max = a.value("block_hours_max", s.activity.block_hours_max);
            s.activity.block_start_min_hour = a.value("block_start_min_hour", s.activity.block_start_min_hour);
            s.activity.block_start_max_hour = a.value("block_start_max_hour", s.activity.block_start_max_hour);
        }
        field = "profiles";
        check(j.contains("profiles") && j.at("profiles").is_array(), field, "must be a list");
        std::size_t i = 0;
        for (const auto& pj : j.at("profiles")) {
            const std::string f = "profiles[" + std::to_string(i++) + "]";
            OsProfile p;
            field = f + ".label";
            p.label = CategoryLabel(pj.at("label").get<std::string>());
            field = f + ".host_count";
            p.host_count = pj.at("host_count").get<std::uint64_t>();
            field = f + ".flows_per_active_hour";
            const auto& rate = pj.at("flows_per_active_hour");
            p.rate_median = rate.at("median").get<double>();
            p.rate_sigma = rate.value("sigma", 0.0);
            field = f + ".presence";
            const auto& pres = pj.at("presence");
            p.p_tcp = pres.at("tcp").get<double>();
            p.p_tls = pres.at("tls").get<double>();
            p.p_http = pres.at("http").get<double>();
            field = f + ".http_host_fraction";
            p.http_host_fraction = pj.value("http_host_fraction", 1.0);
            for (auto proto : all_protocols) {
                const std::string name(to_string(proto));
                field = f + ".host_pool." + name;
                p.host_pool[static_cast<std::size_t>(proto)] = pj.at("host_pool").at(name).get<std::size_t>();
                field = f + ".fingerprints." + name;
                for (const auto& wj : pj.at("fingerprints").at(name)) {
                    WeightedFingerprint w{parse_canonical(wj.at("fp").get<std::string>()), wj.at("p").get<double>()};
                    p.fingerprints[static_cast<std::size_t>(proto)].push_back(std::move(w));
                }
            }
            s.profiles.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidSpec(field + ": " + e.what());
    } catch (const GrammarError& e) {
        throw InvalidSpec(field + ": " + e.what());
    }
    s.validate();
    return s;
}

CorpusSpec default_spec()
{
    return CorpusSpec::from_json(nlohmann::json::parse(detail::default_spec_json));
}

namespace {

struct HostPool {
    std::vector<const Fingerprint*> fps;
    std::vector<double> cumulative;
};

HostPool draw_pool(const std::vector<WeightedFingerprint>& dist, std::size_t size, Rng& rng)
{
    std::vector<double> weights;
    for (const auto& w : dist)
        weights.push_back(w.p);
    HostPool pool;
    size = std::min(size, dist.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < size; ++k) {
        std::vector<double> cum(weights.size());
        double run = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i)
            cum[i] = run += weights[i];
        const std::size_t pick = rng.pick_cumulative(cum);
        pool.fps.push_back(&dist[pick].fp);
        acc += weights[pick];
        pool.cumulative.push_back(acc);
        weights[pick] = 0.0;
    }
    return pool;
}

const Fingerprint& draw(const HostPool& pool, Rng& rng)
{
    return *pool.fps[rng.pick_cumulative(pool.cumulative)];
}

IpAddress host_address(std::uint64_t index)
{
    return IpAddress::v4(10, static_cast<std::uint8_t>((index >> 16) & 0xff), static_cast<std::uint8_t>((index >> 8) & 0xff),
                         static_cast<std::uint8_t>(index & 0xff));
}

} // namespace

std::vector<SessionRecord> generate(const CorpusSpec& spec)
{
    spec.validate();
    const std::string material = "osfp synthetic corpus key " + std::to_string(spec.seed);
    const PseudonymKey key(std::span(reinterpret_cast<const std::uint8_t*>(material.data()), material.size()));

    constexpr std::size_t n_servers = 64;
    std::vector<std::string> servers;
    for (std::size_t i = 0; i < n_servers; ++i)
        servers.push_back(pseudonymize_address(
            IpAddress::v4(i < 32 ? 198 : 203, i < 32 ? 51 : 0, i < 32 ? 100 : 113, static_cast<std::uint8_t>(1 + i)), key));

    std::vector<SessionRecord> out;
    std::uint64_t host_index = 0;
    const auto& act = spec.activity;
    for (const auto& profile : spec.profiles) {
        for (std::uint64_t h = 0; h < profile.host_count; ++h, ++host_index) {
            Rng rng(substream_seed(spec.seed, 1, host_index));
            const std::string host_id = pseudonymize_address(host_address(host_index + 1), key);
            const double rate = profile.rate_median * std::exp(profile.rate_sigma * rng.normal());
            const bool http_host = rng.bernoulli(profile.http_host_fraction);
            std::array<HostPool, 3> pools;
            for (auto proto : all_protocols) {
                const auto i = static_cast<std::size_t>(proto);
                pools[i] = draw_pool(profile.fingerprints[i], profile.host_pool[i], rng);
            }
            std::uint32_t port_counter = static_cast<std::uint32_t>(rng.below(16384));
            for (int day = 0; day < spec.days; ++day) {
                if (!rng.bernoulli(act.day_active_prob))
                    continue;
                const double day_start = static_cast<double>(spec.start_time) + 86400.0 * day;
                const double begin =
                    day_start + 3600.0 * (act.block_start_min_hour +
                                          rng.uniform() * (act.block_start_max_hour - act.block_start_min_hour));
                const double end =
                    begin + 3600.0 * (act.block_hours_min + rng.uniform() * (act.block_hours_max - act.block_hours_min));
                for (double t = begin + rng.exponential(rate / 3600.0); t < end; t += rng.exponential(rate / 3600.0)) {
                    SessionRecord s;
                    s.start_time = std::round(t * 1e6) / 1e6;
                    s.key.src_id = host_id;
                    s.key.dst_id = servers[rng.below(n_servers)];
                    s.key.src_port = static_cast<std::uint16_t>(49152 + (port_counter++ % 16384));
                    const double u = rng.uniform();
                    const bool tls = u < profile.p_tls;
                    const bool http = !tls && http_host && u < profile.p_tls + profile.p_http;
                    s.key.dst_port = http ? 80 : 443;
                    const bool tcp = rng.bernoulli(profile.p_tcp) || (!tls && !http);
                    if (tcp)
                        s.tcp_fp = draw(pools[0], rng);
                    if (tls)
                        s.tls_fp = draw(pools[1], rng);
                    if (http)
                        s.http_fp = draw(pools[2], rng);
                    s.label = profile.label;
                    out.push_back(std::move(s));
                }
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const SessionRecord& a, const SessionRecord& b) {
        if (a.start_time != b.start_time)
            return a.start_time < b.start_time;
        return a.key < b.key;
    });
    return out;
}

nlohmann::ordered_json CorpusSummary::to_json() const
{
    nlohmann::ordered_json with;
    for (auto p : all_protocols)
        with[std::string(to_string(p))] = sessions_with[static_cast<std::size_t>(p)];
    return {{"sessions", sessions},
            {"sessions_with", std::move(with)},
            {"hosts_per_label", hosts_per_label},
            {"sessions_per_label", sessions_per_label}};
}

CorpusSummary summarize(std::span<const SessionRecord> sessions)
{
    CorpusSummary s;
    std::map<std::string, std::set<std::string>> hosts;
    for (const auto& r : sessions) {
        ++s.sessions;
        for (auto p : all_protocols)
            s.sessions_with[static_cast<std::size_t>(p)] += r.fingerprint(p).has_value();
        if (r.label) {
            hosts[r.label->str()].insert(r.key.src_id);
            ++s.sessions_per_label[r.label->str()];
        }
    }
    for (const auto& [label, ids] : hosts)
        s.hosts_per_label[label] = ids.size();
    return s;
}

std::string corpus_hash(std::span<const SessionRecord> sessions)
{
    std::ostringstream out;
    for (const auto& s : sessions)
        write_jsonl(out, s);
    return sha256_hex(out.str());
}

} // namespace osfp
