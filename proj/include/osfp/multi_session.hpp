#pragma once

#include "osfp/forest.hpp"
#include "osfp/session.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace osfp {

using ProtocolSet = std::set<Protocol>;

/// Parses "tcp", "tls", "http", "all" or a list of those.
ProtocolSet protocol_set_from_json(const nlohmann::json& j);
/// "tcp+tls"-style name, "all" for the full set.
std::string protocol_set_name(const ProtocolSet& s);

/// The fingerprints one host showed within one tumbling window.
struct HostWindow {
    std::string host_id;
    /// Seconds since the epoch; a multiple of the window duration.
    std::int64_t window_start = 0;
    int duration_minutes = 60;
    /// Per protocol: canonical fingerprint -> number of sessions carrying it.
    std::array<std::map<std::string, std::uint32_t>, 3> fingerprints;
    std::optional<CategoryLabel> label;

    std::map<std::string, std::uint32_t>& of(Protocol p) { return fingerprints[static_cast<std::size_t>(p)]; }
    const std::map<std::string, std::uint32_t>& of(Protocol p) const
    {
        return fingerprints[static_cast<std::size_t>(p)];
    }
    std::size_t distinct(Protocol p) const { return of(p).size(); }
    std::size_t distinct() const;
    bool empty() const { return distinct() == 0; }

    friend bool operator==(const HostWindow&, const HostWindow&) = default;
};

/// Epoch-aligned tumbling windows, ordered by (window_start, host_id).
/// Throws Error for durations outside [1, 1440] minutes or a host seen with
/// two labels.
std::vector<HostWindow> build_windows(std::span<const SessionRecord> sessions, int duration_minutes);

/// Keeps only the chosen protocols' fingerprints; windows left empty are dropped.
std::vector<HostWindow> restrict_protocols(std::vector<HostWindow> windows, const ProtocolSet& protocols);

enum class OccurrenceUnit { window, flow };

OccurrenceUnit occurrence_unit_from_string(std::string_view s);

class FeatureDictionary {
public:
    FeatureDictionary() = default;
    FeatureDictionary(std::array<std::vector<std::string>, 3> entries, std::uint64_t min_count, OccurrenceUnit unit);

    const std::vector<std::string>& entries(Protocol p) const { return entries_[static_cast<std::size_t>(p)]; }
    std::uint64_t min_count() const noexcept { return min_count_; }
    OccurrenceUnit unit() const noexcept { return unit_; }

    /// Sum of the chosen protocols' segment lengths.
    std::size_t size(const ProtocolSet& protocols) const;
    /// Position of a fingerprint within its protocol segment.
    std::optional<std::size_t> position(Protocol p, const std::string& canonical) const;
    /// SHA-256 over the ordered entries; identifies a feature layout.
    std::string hash() const;

    nlohmann::ordered_json to_json() const;
    static FeatureDictionary from_json(const nlohmann::json& j);

    friend bool operator==(const FeatureDictionary& a, const FeatureDictionary& b)
    {
        return a.entries_ == b.entries_ && a.min_count_ == b.min_count_ && a.unit_ == b.unit_;
    }

private:
    std::array<std::vector<std::string>, 3> entries_;
    std::array<std::unordered_map<std::string, std::size_t>, 3> index_;
    std::uint64_t min_count_ = 0;
    OccurrenceUnit unit_ = OccurrenceUnit::window;
};

/// Fingerprints occurring at least `min_count` times in training, by
/// descending count then canonical string. Throws EmptyTraining.
FeatureDictionary build_feature_dictionary(std::span<const HostWindow> train, std::uint64_t min_count = 100,
                                           OccurrenceUnit unit = OccurrenceUnit::window);

struct FeatureVector {
    std::vector<std::uint8_t> bits;
    /// Segment start per chosen protocol, in tcp, tls, http order.
    std::vector<std::pair<Protocol, std::size_t>> layout;
};

/// Segments concatenated in tcp, tls, http order restricted to `protocols`.
FeatureVector vectorize(const HostWindow& w, const FeatureDictionary& dict, const ProtocolSet& protocols);
/// Set columns of the same vector, ascending.
std::vector<std::uint32_t> vectorize_sparse(const HostWindow& w, const FeatureDictionary& dict,
                                            const ProtocolSet& protocols);
BinaryMatrix to_matrix(std::span<const HostWindow> windows, const FeatureDictionary& dict,
                       const ProtocolSet& protocols);

struct FilteredWindows {
    std::vector<HostWindow> windows;
    std::vector<CategoryLabel> removed;
};

/// Drops every label with fewer than `min_windows` windows.
FilteredWindows filter_rare_classes(std::vector<HostWindow> windows, std::size_t min_windows = 10);

enum class TaxonomyName { original, general, vulnerable };

TaxonomyName taxonomy_from_string(std::string_view s);
std::string to_string(TaxonomyName t);

class LabelTaxonomy {
public:
    explicit LabelTaxonomy(TaxonomyName name) : name_(name) {}

    TaxonomyName name() const noexcept { return name_; }
    /// Throws UnmappedLabel for labels outside the taxonomy's domain.
    CategoryLabel map(const CategoryLabel& label) const;

private:
    TaxonomyName name_;
};

std::vector<HostWindow> apply_taxonomy(std::vector<HostWindow> windows, const LabelTaxonomy& tax);

enum class OsFamily { windows, apple, other };

/// Win* -> windows; OSX*, Mac*, iOS* -> apple.
OsFamily os_family(const CategoryLabel& label);

} // namespace osfp

namespace osfp {

/// Mean distinct fingerprints per window: per protocol over the windows that
/// show that protocol, and overall across every window.
struct WindowMeans {
    std::array<double, 3> per_protocol{};
    std::array<std::size_t, 3> windows_with{};
    double all = 0.0;
    std::size_t windows = 0;

    nlohmann::ordered_json to_json() const;
};

WindowMeans window_fingerprint_means(std::span<const HostWindow> windows);

} // namespace osfp
