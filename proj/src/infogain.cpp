#include "osfp/infogain.hpp"

#include "osfp/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace osfp {

namespace {

void require_nonempty(const CountStore& store)
{
    if (store.empty())
        throw EmptyStore("count store is empty");
}

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

std::string fmt(double v, int digits = 6)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n\r") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + '"';
}

} // namespace

PosteriorMode posterior_mode_from_string(std::string_view s)
{
    if (s == "empirical")
        return PosteriorMode::empirical;
    if (s == "bayes-uniform-likelihood")
        return PosteriorMode::bayes_uniform_likelihood;
    throw Error("unknown posterior mode: " + std::string(s));
}

PriorDistribution estimate_prior(const CountStore& store)
{
    require_nonempty(store);
    PriorDistribution p;
    const double n = static_cast<double>(store.total());
    for (const auto& [label, count] : store.label_totals())
        p.probs[label] = static_cast<double>(count) / n;
    return p;
}

PosteriorTable posterior(const CountStore& store, PosteriorMode mode, double alpha)
{
    require_nonempty(store);
    if (alpha < 0.0)
        throw Error("smoothing must be >= 0");
    const PriorDistribution prior = estimate_prior(store);
    const double n = static_cast<double>(store.total());
    const double k = static_cast<double>(store.label_totals().size());
    PosteriorTable table;
    table.rows.reserve(store.rows().size());
    for (const auto& [key, labels] : store.rows()) {
        PosteriorRow row;
        row.fingerprint = key;
        double count_f = 0.0;
        for (const auto& [label, c] : labels)
            count_f += static_cast<double>(c);
        row.p_f = count_f / n;
        double nf = 0.0;
        for (const auto& [label, c] : labels)
            nf += prior.probs.at(label);
        row.n_f = nf;
        if (mode == PosteriorMode::bayes_uniform_likelihood) {
            for (const auto& [label, c] : labels)
                row.probs[label] = prior.probs.at(label) / nf;
        } else if (alpha > 0.0) {
            for (const auto& [label, total] : store.label_totals()) {
                auto it = labels.find(label);
                double c = it == labels.end() ? 0.0 : static_cast<double>(it->second);
                row.probs[label] = (c + alpha) / (count_f + alpha * k);
            }
        } else {
            for (const auto& [label, c] : labels)
                row.probs[label] = static_cast<double>(c) / count_f;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

double entropy(const Distribution& p)
{
    double h = 0.0;
    for (const auto& [label, v] : p)
        h -= xlog2x(v);
    return h;
}

double conditional_entropy(const PosteriorTable& table)
{
    double h = 0.0;
    for (const auto& row : table.rows)
        h += row.p_f * entropy(row.probs);
    return h;
}

double kl_divergence(const Distribution& p, const Distribution& q)
{
    double d = 0.0;
    for (const auto& [label, pv] : p) {
        if (pv <= 0.0)
            continue;
        auto it = q.find(label);
        if (it == q.end() || it->second <= 0.0)
            return INFINITY;
        d += pv * std::log2(pv / it->second);
    }
    return d;
}

InfoGainReport information_gain(const CountStore& store)
{
    const PriorDistribution prior = estimate_prior(store);
    const PosteriorTable table = posterior(store);
    InfoGainReport r;
    r.total = store.total();
    r.h_prior = entropy(prior);
    r.h_posterior = conditional_entropy(table);
    r.gain = r.h_prior - r.h_posterior;
    r.per_fingerprint.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        FingerprintGain g;
        g.fingerprint = row.fingerprint;
        g.d_kl = kl_divergence(row.probs, prior.probs);
        g.normalized_gain = row.p_f * g.d_kl;
        g.count = store.count_key(row.fingerprint);
        r.gain_kl += g.normalized_gain;
        r.per_fingerprint.push_back(std::move(g));
    }
    if (std::fabs(r.gain - r.gain_kl) > 1e-9)
        throw InconsistentStore("entropy and KL forms of the gain disagree: " + fmt(r.gain, 12) + " vs " +
                                fmt(r.gain_kl, 12));
    return r;
}

std::vector<FingerprintGain> top_fingerprints_by_gain(const CountStore& store, std::size_t k)
{
    auto all = information_gain(store).per_fingerprint;
    std::sort(all.begin(), all.end(), [](const FingerprintGain& a, const FingerprintGain& b) {
        if (a.normalized_gain != b.normalized_gain)
            return a.normalized_gain > b.normalized_gain;
        return a.fingerprint < b.fingerprint;
    });
    if (all.size() > k)
        all.resize(k);
    return all;
}

CountUnit count_unit_from_string(std::string_view s)
{
    if (s == "flow")
        return CountUnit::flow;
    if (s == "host")
        return CountUnit::host;
    if (s == "window")
        return CountUnit::window;
    throw Error("unknown count unit: " + std::string(s));
}

std::string to_string(CountUnit u)
{
    switch (u) {
    case CountUnit::flow: return "flow";
    case CountUnit::host: return "host";
    case CountUnit::window: return "window";
    }
    return "?";
}

CountStore count_sessions(std::span<const SessionRecord> sessions, Protocol protocol, CountUnit unit,
                          double window_seconds)
{
    if (unit == CountUnit::window && !(window_seconds > 0.0))
        throw Error("window length must be positive");
    CountStore store;
    // (host, window index) -> (label, fingerprint set); host units use window 0
    std::map<std::pair<std::string, std::int64_t>, std::pair<std::string, std::set<std::string>>> groups;
    for (const auto& s : sessions) {
        const auto& fp = s.fingerprint(protocol);
        if (!fp || !s.label)
            continue;
        if (unit == CountUnit::flow) {
            store.observe(*fp, *s.label);
            continue;
        }
        std::int64_t w = unit == CountUnit::window
                             ? static_cast<std::int64_t>(std::floor(s.start_time / window_seconds))
                             : 0;
        auto& g = groups[{s.key.src_id, w}];
        g.first = s.label->str();
        g.second.insert(fp->canonical());
    }
    for (const auto& [id, g] : groups) {
        CategoryLabel label(g.first);
        if (unit == CountUnit::host) {
            for (const auto& key : g.second)
                store.observe(key, label);
        } else {
            std::vector<std::string> keys(g.second.begin(), g.second.end());
            store.observe(composite_key(keys), label);
        }
    }
    return store;
}

nlohmann::ordered_json InfoGainReport::to_json() const
{
    nlohmann::ordered_json fps = nlohmann::ordered_json::array();
    for (const auto& g : per_fingerprint)
        fps.push_back({{"fp", g.fingerprint}, {"count", g.count}, {"d_kl", g.d_kl}, {"normalized_gain", g.normalized_gain}});
    return {{"h_prior", h_prior},
            {"h_posterior", h_posterior},
            {"gain", gain},
            {"total", total},
            {"per_fingerprint", std::move(fps)}};
}

std::string table1_csv(std::span<const InfoGainRow> rows)
{
    std::string out = "data_type,h_c,h_c_given_f,gain\n";
    for (const auto& r : rows)
        out += csv_field(r.data_type) + "," + fmt(r.report.h_prior) + "," + fmt(r.report.h_posterior) + "," +
               fmt(r.report.gain) + "\n";
    return out;
}

std::string table2_csv(std::span<const FingerprintGain> rows)
{
    std::string out = "fingerprint,normalized_gain\n";
    for (const auto& r : rows)
        out += csv_field(r.fingerprint) + "," + fmt(r.normalized_gain, 8) + "\n";
    return out;
}

} // namespace osfp
