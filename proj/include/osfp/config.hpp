#pragma once

#include "osfp/experiment.hpp"
#include "osfp/session.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace osfp {

/// Where a suite gets its sessions: the bundled synthetic spec, a spec
/// file, or a JSON Lines corpus.
struct CorpusSource {
    enum class Kind { synth_default, synth_spec, sessions };
    Kind kind = Kind::synth_default;
    std::filesystem::path path;
    /// Overrides the corpus spec's own seed (synthetic sources only).
    std::optional<std::uint64_t> seed;

    nlohmann::ordered_json to_json() const;
};

struct SingleSettings {
    std::vector<Protocol> protocols;
    Fallback fallback = Fallback::abstain;
};

struct MultiRun {
    std::string name;
    ExperimentSetup setup;
};

struct SweepSettings {
    std::vector<int> minutes;
    std::vector<ProtocolSet> protocol_sets;
    ForestSettings forest;
};

struct EvasionSettings {
    ProtocolSet protocols{Protocol::tcp, Protocol::tls, Protocol::http};
    int window_minutes = 60;
    std::vector<double> levels;
    std::vector<std::string> scopes;
};

/// A parsed experiment / evasion config file.
struct SuiteConfig {
    CorpusSource corpus;
    PipelineSettings pipeline;
    int window_minutes = 60;
    std::optional<SingleSettings> single;
    std::vector<MultiRun> multi;
    std::optional<SweepSettings> sweep;
    std::optional<EvasionSettings> evasion;

    /// Relative paths resolve against `base_dir`. Throws ConfigError with a
    /// JSON-pointer field path; referenced files must exist.
    static SuiteConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    /// Throws IoError if unreadable, ConfigError if invalid.
    static SuiteConfig load(const std::filesystem::path& path);
};

/// Parses a forest block on top of `base` (missing keys keep base values).
ForestSettings forest_settings_from_json(const nlohmann::json& j, const std::string& where,
                                         ForestSettings base = {});

/// Generates or reads the corpus.
std::vector<SessionRecord> load_corpus(const CorpusSource& source);

} // namespace osfp
