#include "osfp/obfuscation.hpp"

#include "osfp/error.hpp"

#include <cmath>
#include <set>

namespace osfp {

std::map<CategoryLabel, std::uint64_t> host_counts(std::span<const SessionRecord> sessions)
{
    std::map<CategoryLabel, std::set<std::string>> hosts;
    for (const auto& s : sessions)
        if (s.label)
            hosts[*s.label].insert(s.key.src_id);
    std::map<CategoryLabel, std::uint64_t> out;
    for (const auto& [label, ids] : hosts)
        out.emplace(label, ids.size());
    return out;
}

ObfuscationMapping build_cross_mapping(const std::map<CategoryLabel, std::uint64_t>& hosts)
{
    std::optional<CategoryLabel> top_windows, top_apple;
    std::uint64_t n_windows = 0, n_apple = 0;
    for (const auto& [label, n] : hosts) {
        switch (os_family(label)) {
        case OsFamily::windows:
            if (!top_windows || n > n_windows) {
                top_windows = label;
                n_windows = n;
            }
            break;
        case OsFamily::apple:
            if (!top_apple || n > n_apple) {
                top_apple = label;
                n_apple = n;
            }
            break;
        case OsFamily::other:
            break;
        }
    }
    if (!top_windows)
        throw MissingFamily("no Windows label in the corpus");
    if (!top_apple)
        throw MissingFamily("no Mac or iOS label in the corpus");
    ObfuscationMapping m;
    for (const auto& [label, n] : hosts) {
        auto family = os_family(label);
        if (family == OsFamily::windows)
            m.emplace(label, *top_apple);
        else if (family == OsFamily::apple)
            m.emplace(label, *top_windows);
    }
    return m;
}

TargetSampler TargetSampler::from_windows(std::span<const HostWindow> windows)
{
    std::map<std::pair<CategoryLabel, Protocol>, std::map<std::string, std::uint64_t>> counts;
    for (const auto& w : windows) {
        if (!w.label)
            continue;
        for (auto p : all_protocols)
            for (const auto& [fp, n] : w.of(p))
                counts[{*w.label, p}][fp] += n;
    }
    TargetSampler s;
    for (auto& [key, fps] : counts) {
        Table t;
        double acc = 0.0;
        for (const auto& [fp, n] : fps) {
            acc += static_cast<double>(n);
            t.fingerprints.push_back(fp);
            t.cumulative.push_back(acc);
        }
        s.tables_.emplace(key, std::move(t));
    }
    return s;
}

bool TargetSampler::has_support(const CategoryLabel& label, Protocol p) const
{
    return tables_.count({label, p}) > 0;
}

std::vector<std::pair<std::string, double>> TargetSampler::distribution(const CategoryLabel& label, Protocol p) const
{
    std::vector<std::pair<std::string, double>> out;
    auto it = tables_.find({label, p});
    if (it == tables_.end())
        return out;
    const auto& t = it->second;
    double prev = 0.0;
    for (std::size_t i = 0; i < t.fingerprints.size(); ++i) {
        out.emplace_back(t.fingerprints[i], (t.cumulative[i] - prev) / t.cumulative.back());
        prev = t.cumulative[i];
    }
    return out;
}

const std::string& TargetSampler::draw(const CategoryLabel& label, Protocol p, Rng& rng) const
{
    auto it = tables_.find({label, p});
    if (it == tables_.end())
        throw EmptySamplerSupport(label.str() + " never showed a " + std::string(to_string(p)) + " fingerprint");
    return it->second.fingerprints[rng.pick_cumulative(it->second.cumulative)];
}

HostWindow obfuscate_window(const HostWindow& window, const ObfuscationMapping& mapping,
                            const TargetSampler& sampler, const ObfuscationConfig& config, Rng& rng,
                            ObfuscationStats* stats)
{
    if (!(config.fraction >= 0.0 && config.fraction <= 1.0))
        throw Error("obfuscation fraction must lie in [0, 1]");
    if (stats)
        ++stats->windows;
    if (config.fraction == 0.0 || !window.label)
        return window;
    auto target = mapping.find(*window.label);
    if (target == mapping.end())
        return window;

    std::vector<std::pair<Protocol, std::string>> in_scope;
    for (auto p : all_protocols)
        if (config.scope.count(p))
            for (const auto& [fp, n] : window.of(p))
                in_scope.emplace_back(p, fp);
    const std::size_t k = in_scope.size();
    auto r = static_cast<std::size_t>(std::ceil(config.fraction * static_cast<double>(k) - 1e-9));
    r = std::min(r, k);

    std::vector<std::size_t> order(k);
    for (std::size_t i = 0; i < k; ++i)
        order[i] = i;
    for (std::size_t i = 0; i < r; ++i)
        std::swap(order[i], order[i + static_cast<std::size_t>(rng.below(k - i))]);
    order.resize(r);
    std::sort(order.begin(), order.end());

    HostWindow out = window;
    std::vector<std::pair<Protocol, std::uint32_t>> pending;
    for (auto i : order) {
        const auto& [p, fp] = in_scope[i];
        auto& m = out.of(p);
        auto it = m.find(fp);
        pending.emplace_back(p, it->second);
        m.erase(it);
    }
    for (const auto& [p, flows] : pending) {
        if (!sampler.has_support(target->second, p)) {
            if (stats)
                ++stats->dropped;
            continue;
        }
        out.of(p)[sampler.draw(target->second, p, rng)] += flows;
        if (stats)
            ++stats->replaced;
    }
    return out;
}

nlohmann::ordered_json mapping_to_json(const ObfuscationMapping& m)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [from, to] : m)
        j[from.str()] = to.str();
    return j;
}

} // namespace osfp
