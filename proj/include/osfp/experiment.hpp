#pragma once

#include "osfp/confusion.hpp"
#include "osfp/forest.hpp"
#include "osfp/infogain.hpp"
#include "osfp/multi_session.hpp"
#include "osfp/obfuscation.hpp"
#include "osfp/single_session.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace osfp {

struct ForestSettings {
    std::size_t n_trees = 75;
    /// Entries are integers or null (unlimited).
    std::vector<std::optional<int>> max_depth{8, 16, 32, std::nullopt};
    /// Entries are integers or "sqrt" / "quarter" / "half" / "all".
    std::vector<nlohmann::json> features_per_split{"sqrt", "quarter", "half"};
    std::size_t folds = 3;

    HyperGrid grid(std::size_t n_features) const;
    nlohmann::ordered_json to_json() const;
};

/// Settings shared by every run of a suite.
struct PipelineSettings {
    int train_days = 3;
    std::uint64_t min_count = 100;
    OccurrenceUnit count_unit = OccurrenceUnit::window;
    std::size_t min_windows = 10;
    ForestSettings forest;
    std::uint64_t seed = 42;
    std::size_t workers = 1;
};

struct ExperimentSetup {
    ProtocolSet protocols{Protocol::tcp, Protocol::tls, Protocol::http};
    int window_minutes = 60;
    TaxonomyName taxonomy = TaxonomyName::original;
};

struct TimeSplit {
    double boundary = 0.0;
    std::vector<SessionRecord> train;
    std::vector<SessionRecord> test;
};

/// Training covers the first `train_days` whole UTC days of the corpus,
/// testing everything after. Unlabeled sessions are dropped.
TimeSplit split_by_time(std::span<const SessionRecord> sessions, int train_days);

struct ExperimentResult {
    ExperimentSetup setup;
    double split_time = 0.0;
    std::vector<CategoryLabel> removed_labels;
    FeatureDictionary dictionary;
    GridSearchResult cv;
    ForestModel model;
    /// Protocol-restricted, filtered windows under the setup's taxonomy.
    std::vector<HostWindow> train_windows;
    std::vector<HostWindow> test_windows;
    /// Test windows whose label did not survive training-side filtering.
    std::size_t dropped_test_windows = 0;
    ConfusionMatrix matrix;

    double accuracy() const { return matrix.accuracy(); }
    nlohmann::ordered_json to_json() const;
};

/// Throws InsufficientClasses when fewer than two labels survive filtering.
ExperimentResult run_experiment(const TimeSplit& split, const ExperimentSetup& setup, const PipelineSettings& settings);

struct SingleResult {
    Protocol protocol;
    SingleEvaluation evaluation;

    nlohmann::ordered_json to_json() const;
};

SingleResult run_single(const TimeSplit& split, Protocol protocol, Fallback fallback);

struct SweepPoint {
    ProtocolSet protocols;
    int window_minutes = 60;
    double accuracy = 0.0;
};

std::vector<SweepPoint> run_window_sweep(const TimeSplit& split, std::span<const int> minutes,
                                         std::span<const ProtocolSet> protocol_sets, const PipelineSettings& settings);
std::string sweep_csv(std::span<const SweepPoint> points);

struct EvasionPoint {
    std::string scope;
    double level = 0.0;
    double accuracy = 0.0;
    ObfuscationStats stats;
};

struct EvasionReport {
    double baseline = 0.0;
    ObfuscationMapping mapping;
    std::vector<EvasionPoint> points;

    nlohmann::ordered_json to_json() const;
    std::string to_csv() const;
};

/// Obfuscates the experiment's test windows for every (scope, level) and
/// re-evaluates its model. Scope names are protocols or "all" (every model
/// protocol). Training data and labels stay untouched.
EvasionReport run_evasion_sweep(const ExperimentResult& experiment, const ObfuscationMapping& mapping,
                                std::span<const double> levels, std::span<const std::string> scopes,
                                std::uint64_t seed);

/// Counts one composite key per window over the chosen protocols.
CountStore count_windows(std::span<const HostWindow> windows, const ProtocolSet& protocols);

} // namespace osfp
