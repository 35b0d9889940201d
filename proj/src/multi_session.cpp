#include "osfp/multi_session.hpp"

#include "osfp/digest.hpp"
#include "osfp/error.hpp"

#include <algorithm>
#include <cmath>

namespace osfp {

ProtocolSet protocol_set_from_json(const nlohmann::json& j)
{
    ProtocolSet out;
    auto add = [&](const std::string& s) {
        if (s == "all")
            out.insert(all_protocols.begin(), all_protocols.end());
        else
            out.insert(protocol_from_string(s));
    };
    if (j.is_string()) {
        add(j.get<std::string>());
    } else if (j.is_array()) {
        for (const auto& e : j)
            add(e.get<std::string>());
    } else {
        throw Error("protocols must be a string or a list of strings");
    }
    if (out.empty())
        throw Error("protocol set is empty");
    return out;
}

std::string protocol_set_name(const ProtocolSet& s)
{
    if (s.size() == all_protocols.size())
        return "all";
    std::string out;
    for (auto p : s) {
        if (!out.empty())
            out += "+";
        out += to_string(p);
    }
    return out;
}

std::size_t HostWindow::distinct() const
{
    std::size_t n = 0;
    for (const auto& m : fingerprints)
        n += m.size();
    return n;
}

std::vector<HostWindow> build_windows(std::span<const SessionRecord> sessions, int duration_minutes)
{
    if (duration_minutes < 1 || duration_minutes > 1440)
        throw Error("window duration must be within [1, 1440] minutes");
    const std::int64_t span = std::int64_t{duration_minutes} * 60;
    std::map<std::pair<std::int64_t, std::string>, HostWindow> windows;
    std::map<std::string, CategoryLabel> host_labels;
    for (const auto& s : sessions) {
        if (s.label) {
            auto [it, inserted] = host_labels.emplace(s.key.src_id, *s.label);
            if (!inserted && it->second != *s.label)
                throw Error("host " + s.key.src_id + " carries two labels: " + it->second.str() + ", " +
                            s.label->str());
        }
        const auto start = static_cast<std::int64_t>(std::floor(s.start_time / static_cast<double>(span))) * span;
        HostWindow* w = nullptr;
        for (auto p : all_protocols) {
            const auto& fp = s.fingerprint(p);
            if (!fp)
                continue;
            if (!w) {
                w = &windows[{start, s.key.src_id}];
                w->host_id = s.key.src_id;
                w->window_start = start;
                w->duration_minutes = duration_minutes;
            }
            ++w->of(p)[fp->canonical()];
        }
    }
    std::vector<HostWindow> out;
    out.reserve(windows.size());
    for (auto& [key, w] : windows) {
        if (auto it = host_labels.find(w.host_id); it != host_labels.end())
            w.label = it->second;
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<HostWindow> restrict_protocols(std::vector<HostWindow> windows, const ProtocolSet& protocols)
{
    std::vector<HostWindow> out;
    out.reserve(windows.size());
    for (auto& w : windows) {
        for (auto p : all_protocols)
            if (!protocols.count(p))
                w.of(p).clear();
        if (!w.empty())
            out.push_back(std::move(w));
    }
    return out;
}

OccurrenceUnit occurrence_unit_from_string(std::string_view s)
{
    if (s == "window")
        return OccurrenceUnit::window;
    if (s == "flow")
        return OccurrenceUnit::flow;
    throw Error("unknown occurrence unit: " + std::string(s));
}

FeatureDictionary::FeatureDictionary(std::array<std::vector<std::string>, 3> entries, std::uint64_t min_count,
                                     OccurrenceUnit unit)
    : entries_(std::move(entries)), min_count_(min_count), unit_(unit)
{
    for (std::size_t p = 0; p < entries_.size(); ++p) {
        for (std::size_t i = 0; i < entries_[p].size(); ++i)
            if (!index_[p].emplace(entries_[p][i], i).second)
                throw Error("duplicate dictionary entry: " + entries_[p][i]);
    }
}

std::size_t FeatureDictionary::size(const ProtocolSet& protocols) const
{
    std::size_t n = 0;
    for (auto p : protocols)
        n += entries(p).size();
    return n;
}

std::optional<std::size_t> FeatureDictionary::position(Protocol p, const std::string& canonical) const
{
    const auto& idx = index_[static_cast<std::size_t>(p)];
    auto it = idx.find(canonical);
    if (it == idx.end())
        return std::nullopt;
    return it->second;
}

std::string FeatureDictionary::hash() const
{
    std::string text;
    for (auto p : all_protocols)
        for (const auto& e : entries(p))
            text.append(to_string(p)).append("\t").append(e).append("\n");
    return sha256_hex(text);
}

nlohmann::ordered_json FeatureDictionary::to_json() const
{
    nlohmann::ordered_json j;
    j["min_count"] = min_count_;
    j["unit"] = unit_ == OccurrenceUnit::window ? "window" : "flow";
    for (auto p : all_protocols)
        j[std::string(to_string(p))] = entries(p);
    j["hash"] = hash();
    return j;
}

FeatureDictionary FeatureDictionary::from_json(const nlohmann::json& j)
{
    try {
        std::array<std::vector<std::string>, 3> entries;
        for (auto p : all_protocols) {
            entries[static_cast<std::size_t>(p)] = j.at(std::string(to_string(p))).get<std::vector<std::string>>();
            for (const auto& e : entries[static_cast<std::size_t>(p)])
                if (parse_canonical(e).protocol() != p)
                    throw Error("dictionary entry under the wrong protocol: " + e);
        }
        FeatureDictionary d(std::move(entries), j.at("min_count").get<std::uint64_t>(),
                            occurrence_unit_from_string(j.at("unit").get<std::string>()));
        if (j.contains("hash") && j.at("hash").get<std::string>() != d.hash())
            throw ModelMismatch("dictionary hash does not match its entries");
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("bad dictionary JSON: ") + e.what());
    }
}

FeatureDictionary build_feature_dictionary(std::span<const HostWindow> train, std::uint64_t min_count,
                                           OccurrenceUnit unit)
{
    if (train.empty())
        throw EmptyTraining("no training windows to build a feature dictionary from");
    std::array<std::vector<std::string>, 3> entries;
    for (auto p : all_protocols) {
        std::map<std::string, std::uint64_t> counts;
        for (const auto& w : train)
            for (const auto& [fp, flows] : w.of(p))
                counts[fp] += unit == OccurrenceUnit::window ? 1 : flows;
        std::vector<std::pair<std::string, std::uint64_t>> kept;
        for (auto& [fp, n] : counts)
            if (n >= min_count)
                kept.emplace_back(fp, n);
        std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        for (auto& [fp, n] : kept)
            entries[static_cast<std::size_t>(p)].push_back(fp);
    }
    return FeatureDictionary(std::move(entries), min_count, unit);
}

std::vector<std::uint32_t> vectorize_sparse(const HostWindow& w, const FeatureDictionary& dict,
                                            const ProtocolSet& protocols)
{
    std::vector<std::uint32_t> cols;
    std::size_t offset = 0;
    for (auto p : all_protocols) {
        if (!protocols.count(p))
            continue;
        for (const auto& [fp, n] : w.of(p))
            if (auto i = dict.position(p, fp))
                cols.push_back(static_cast<std::uint32_t>(offset + *i));
        offset += dict.entries(p).size();
    }
    std::sort(cols.begin(), cols.end());
    return cols;
}

FeatureVector vectorize(const HostWindow& w, const FeatureDictionary& dict, const ProtocolSet& protocols)
{
    FeatureVector v;
    v.bits.assign(dict.size(protocols), 0);
    std::size_t offset = 0;
    for (auto p : all_protocols) {
        if (!protocols.count(p))
            continue;
        v.layout.emplace_back(p, offset);
        offset += dict.entries(p).size();
    }
    for (auto c : vectorize_sparse(w, dict, protocols))
        v.bits[c] = 1;
    return v;
}

BinaryMatrix to_matrix(std::span<const HostWindow> windows, const FeatureDictionary& dict,
                       const ProtocolSet& protocols)
{
    BinaryMatrix X(dict.size(protocols));
    for (const auto& w : windows)
        X.add_row(vectorize_sparse(w, dict, protocols));
    return X;
}

FilteredWindows filter_rare_classes(std::vector<HostWindow> windows, std::size_t min_windows)
{
    std::map<std::string, std::size_t> counts;
    for (const auto& w : windows)
        if (w.label)
            ++counts[w.label->str()];
    FilteredWindows out;
    for (const auto& [label, n] : counts)
        if (n < min_windows)
            out.removed.emplace_back(label);
    for (auto& w : windows)
        if (w.label && counts[w.label->str()] >= min_windows)
            out.windows.push_back(std::move(w));
    return out;
}

TaxonomyName taxonomy_from_string(std::string_view s)
{
    if (s == "original")
        return TaxonomyName::original;
    if (s == "general")
        return TaxonomyName::general;
    if (s == "vulnerable")
        return TaxonomyName::vulnerable;
    throw Error("unknown taxonomy: " + std::string(s));
}

std::string to_string(TaxonomyName t)
{
    switch (t) {
    case TaxonomyName::original: return "original";
    case TaxonomyName::general: return "general";
    case TaxonomyName::vulnerable: return "vulnerable";
    }
    return "?";
}

namespace {

enum class Kind { win, osx, ios };

struct ParsedLabel {
    Kind kind;
    std::vector<std::string> version;
};

std::optional<ParsedLabel> parse_os_label(const std::string& s)
{
    static const std::pair<const char*, Kind> prefixes[] = {
        {"Win ", Kind::win}, {"OSX ", Kind::osx}, {"Mac OS X ", Kind::osx}, {"OS X ", Kind::osx}, {"iOS ", Kind::ios}};
    for (const auto& [prefix, kind] : prefixes) {
        const std::string_view pre(prefix);
        if (s.compare(0, pre.size(), pre) != 0)
            continue;
        ParsedLabel p{kind, {}};
        std::string rest = s.substr(pre.size());
        rest = rest.substr(0, rest.find(' '));
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            std::size_t dot = rest.find('.', pos);
            if (dot == std::string::npos)
                dot = rest.size();
            p.version.push_back(rest.substr(pos, dot - pos));
            pos = dot + 1;
        }
        if (p.version.empty() || p.version[0].empty())
            return std::nullopt;
        return p;
    }
    return std::nullopt;
}

} // namespace

OsFamily os_family(const CategoryLabel& label)
{
    auto p = parse_os_label(label.str());
    if (!p)
        return OsFamily::other;
    return p->kind == Kind::win ? OsFamily::windows : OsFamily::apple;
}

CategoryLabel LabelTaxonomy::map(const CategoryLabel& label) const
{
    if (name_ == TaxonomyName::original)
        return label;
    auto p = parse_os_label(label.str());
    if (!p)
        throw UnmappedLabel(label.str());
    const auto& v = p->version;
    if (name_ == TaxonomyName::general) {
        switch (p->kind) {
        case Kind::win:
            if (v[0] == "10")
                return CategoryLabel("Win 10");
            if (v[0] == "6")
                return CategoryLabel("Win 7/8");
            break;
        case Kind::osx:
            if (v.size() >= 2 && !v[1].empty())
                return CategoryLabel("OS X " + v[0] + "." + v[1]);
            break;
        case Kind::ios:
            return CategoryLabel("iOS " + v[0]);
        }
        throw UnmappedLabel(label.str());
    }
    const bool patched = [&] {
        if (p->kind == Kind::win)
            return v.size() == 3 && v[0] == "10" && v[1] == "0" && v[2] == "1439";
        if (p->kind == Kind::osx)
            return v.size() == 3 && v[0] == "10" && v[1] == "12" && (v[2] == "5" || v[2] == "4");
        return false;
    }();
    if (p->kind == Kind::win)
        return CategoryLabel(patched ? "Win" : "Vuln Win");
    return CategoryLabel(patched ? "OS X" : "Vuln OS X");
}

std::vector<HostWindow> apply_taxonomy(std::vector<HostWindow> windows, const LabelTaxonomy& tax)
{
    for (auto& w : windows)
        if (w.label)
            w.label = tax.map(*w.label);
    return windows;
}

} // namespace osfp

namespace osfp {

WindowMeans window_fingerprint_means(std::span<const HostWindow> windows)
{
    WindowMeans m;
    std::array<std::size_t, 3> sums{};
    std::size_t total = 0;
    for (const auto& w : windows) {
        for (auto p : all_protocols) {
            const auto i = static_cast<std::size_t>(p);
            if (w.distinct(p) > 0) {
                sums[i] += w.distinct(p);
                ++m.windows_with[i];
            }
        }
        total += w.distinct();
    }
    m.windows = windows.size();
    for (std::size_t i = 0; i < 3; ++i)
        m.per_protocol[i] = m.windows_with[i] ? static_cast<double>(sums[i]) / static_cast<double>(m.windows_with[i]) : 0.0;
    m.all = m.windows ? static_cast<double>(total) / static_cast<double>(m.windows) : 0.0;
    return m;
}

nlohmann::ordered_json WindowMeans::to_json() const
{
    nlohmann::ordered_json j;
    for (auto p : all_protocols)
        j[std::string(to_string(p))] = per_protocol[static_cast<std::size_t>(p)];
    j["all"] = all;
    j["windows"] = windows;
    return j;
}

} // namespace osfp
