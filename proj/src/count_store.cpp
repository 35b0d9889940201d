#include "osfp/count_store.hpp"

#include "osfp/error.hpp"

namespace osfp {

void CountStore::observe(const Fingerprint& fp, const CategoryLabel& c, std::uint64_t weight)
{
    observe(fp.canonical(), c, weight);
}

void CountStore::observe(std::string_view key, const CategoryLabel& c, std::uint64_t weight)
{
    if (weight == 0)
        throw Error("observation weight must be >= 1");
    auto it = joint_.find(key);
    if (it == joint_.end())
        it = joint_.emplace(std::string(key), LabelCounts{}).first;
    it->second[c] += weight;

    auto kt = key_totals_.find(key);
    if (kt == key_totals_.end())
        kt = key_totals_.emplace(std::string(key), 0).first;
    kt->second += weight;

    label_totals_[c] += weight;
    total_ += weight;
}

void CountStore::merge(const CountStore& other)
{
    for (const auto& [key, labels] : other.joint_)
        for (const auto& [label, n] : labels)
            observe(key, label, n);
}

std::uint64_t CountStore::joint(std::string_view key, const CategoryLabel& c) const
{
    auto it = joint_.find(key);
    if (it == joint_.end())
        return 0;
    auto lt = it->second.find(c);
    return lt == it->second.end() ? 0 : lt->second;
}

std::uint64_t CountStore::count_key(std::string_view key) const
{
    auto it = key_totals_.find(key);
    return it == key_totals_.end() ? 0 : it->second;
}

std::uint64_t CountStore::count_label(const CategoryLabel& c) const
{
    auto it = label_totals_.find(c);
    return it == label_totals_.end() ? 0 : it->second;
}

void CountStore::check_consistency() const
{
    LabelCounts by_label;
    std::uint64_t sum = 0;
    for (const auto& [key, labels] : joint_) {
        std::uint64_t row = 0;
        for (const auto& [label, n] : labels) {
            if (n == 0)
                throw InconsistentStore("zero joint entry for " + key);
            row += n;
            by_label[label] += n;
        }
        if (row != count_key(key))
            throw InconsistentStore("key marginal mismatch for " + key);
        sum += row;
    }
    if (key_totals_.size() != joint_.size())
        throw InconsistentStore("key marginal table has stray entries");
    if (by_label != label_totals_)
        throw InconsistentStore("label marginal mismatch");
    if (sum != total_)
        throw InconsistentStore("total mismatch");
}

nlohmann::json CountStore::to_json() const
{
    nlohmann::json counts = nlohmann::json::array();
    for (const auto& [key, labels] : joint_)
        for (const auto& [label, n] : labels)
            counts.push_back({{"fp", key}, {"label", label.str()}, {"n", n}});
    return {{"counts", std::move(counts)}};
}

CountStore CountStore::from_json(const nlohmann::json& j)
{
    CountStore store;
    if (!j.is_object() || !j.contains("counts") || !j.at("counts").is_array())
        throw InconsistentStore("count store JSON needs a \"counts\" array");
    std::size_t i = 0;
    for (const auto& entry : j.at("counts")) {
        const std::string where = "counts[" + std::to_string(i++) + "]";
        if (!entry.is_object() || !entry.contains("fp") || !entry.contains("label") || !entry.contains("n"))
            throw InconsistentStore(where + ": expected {fp, label, n}");
        const auto& n = entry.at("n");
        if (!n.is_number_unsigned() || n.get<std::uint64_t>() == 0)
            throw InconsistentStore(where + ": n must be a positive integer");
        std::string key = entry.at("fp").get<std::string>();
        try {
            parse_composite_key(key);
        } catch (const GrammarError& e) {
            throw InconsistentStore(where + ": " + e.what());
        }
        store.observe(key, CategoryLabel(entry.at("label").get<std::string>()), n.get<std::uint64_t>());
    }
    store.check_consistency();
    return store;
}

std::set<CategoryLabel> assignment(const CountStore& store, std::string_view key)
{
    std::set<CategoryLabel> out;
    auto it = store.rows().find(key);
    if (it == store.rows().end())
        return out;
    for (const auto& [label, n] : it->second)
        if (n > 0)
            out.insert(label);
    return out;
}

std::set<CategoryLabel> assignment(const CountStore& store, const Fingerprint& fp)
{
    return assignment(store, fp.canonical());
}

bool is_unique_assignment(const CountStore& store)
{
    for (const auto& [key, labels] : store.rows())
        if (labels.size() != 1)
            return false;
    return true;
}

} // namespace osfp
