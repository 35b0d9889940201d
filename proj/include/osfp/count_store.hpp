#pragma once

#include "osfp/fingerprint.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

namespace osfp {

/// Joint occurrence counts over (fingerprint key, category).
///
/// Keys are canonical fingerprint strings, or composite keys joining several
/// canonical strings with '+'. The counting unit (flow, host, window) is the
/// caller's choice. Marginals are maintained incrementally and can be
/// re-verified with `check_consistency()`.
class CountStore {
public:
    using LabelCounts = std::map<CategoryLabel, std::uint64_t>;

    void observe(const Fingerprint& fp, const CategoryLabel& c, std::uint64_t weight = 1);
    void observe(std::string_view key, const CategoryLabel& c, std::uint64_t weight = 1);

    /// Adds every count of `other` into this store (store union).
    void merge(const CountStore& other);

    std::uint64_t joint(std::string_view key, const CategoryLabel& c) const;
    std::uint64_t count_key(std::string_view key) const;
    std::uint64_t count_label(const CategoryLabel& c) const;
    std::uint64_t total() const noexcept { return total_; }
    bool empty() const noexcept { return total_ == 0; }

    /// key -> (label -> count), ordered by key.
    const std::map<std::string, LabelCounts, std::less<>>& rows() const noexcept { return joint_; }
    const LabelCounts& label_totals() const noexcept { return label_totals_; }

    /// Throws InconsistentStore if a marginal differs from the sum of joint entries.
    void check_consistency() const;

    friend bool operator==(const CountStore& a, const CountStore& b)
    {
        return a.joint_ == b.joint_ && a.label_totals_ == b.label_totals_ && a.total_ == b.total_;
    }

    /// {"counts": [{"fp": key, "label": name, "n": count}, ...]}
    nlohmann::json to_json() const;
    /// Loads and validates: keys must parse as (composite) canonical
    /// fingerprints and counts must be positive.
    static CountStore from_json(const nlohmann::json& j);

private:
    std::map<std::string, LabelCounts, std::less<>> joint_;
    std::map<std::string, std::uint64_t, std::less<>> key_totals_;
    LabelCounts label_totals_;
    std::uint64_t total_ = 0;
};

/// {c : joint(fp, c) > 0}; empty for unseen fingerprints.
std::set<CategoryLabel> assignment(const CountStore& store, const Fingerprint& fp);
std::set<CategoryLabel> assignment(const CountStore& store, std::string_view key);

/// True iff every observed key maps to exactly one category.
bool is_unique_assignment(const CountStore& store);

} // namespace osfp
