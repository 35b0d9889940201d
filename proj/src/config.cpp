#include "osfp/config.hpp"

#include "osfp/error.hpp"
#include "osfp/synth.hpp"

#include <fstream>
#include <set>

namespace osfp {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string at_key(const std::string& where, const std::string& key) { return where + "/" + key; }

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!j.is_object())
        throw ConfigError(where, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k))
            throw ConfigError(at_key(where, k), "unknown key");
}

std::uint64_t get_uint(const json& j, const std::string& where, std::uint64_t min, std::uint64_t max)
{
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
        throw ConfigError(where, "expected a non-negative integer");
    auto v = j.get<std::uint64_t>();
    if (v < min || v > max)
        throw ConfigError(where, "must be in [" + std::to_string(min) + ", " + std::to_string(max) + "]");
    return v;
}

std::string get_string(const json& j, const std::string& where)
{
    if (!j.is_string())
        throw ConfigError(where, "expected a string");
    return j.get<std::string>();
}

template <class F>
auto convert(const std::string& where, F&& f)
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where, e.what());
    }
}

ProtocolSet protocols_at(const json& j, const std::string& where)
{
    auto s = convert(where, [&] { return protocol_set_from_json(j); });
    if (s.empty())
        throw ConfigError(where, "protocol set is empty");
    return s;
}

int minutes_at(const json& j, const std::string& where)
{
    return static_cast<int>(get_uint(j, where, 1, 1440));
}

fs::path existing_file(const json& j, const std::string& where, const fs::path& base)
{
    fs::path p = get_string(j, where);
    if (p.is_relative())
        p = base / p;
    if (!fs::is_regular_file(p))
        throw ConfigError(where, "file not found: " + p.string());
    return p;
}

CorpusSource corpus_at(const json& j, const std::string& where, const fs::path& base)
{
    only_keys(j, where, {"synth", "sessions", "seed"});
    CorpusSource c;
    if (j.contains("synth") == j.contains("sessions"))
        throw ConfigError(where, "exactly one of \"synth\" or \"sessions\" is required");
    if (j.contains("sessions")) {
        if (j.contains("seed"))
            throw ConfigError(at_key(where, "seed"), "a seed applies to synthetic corpora only");
        c.kind = CorpusSource::Kind::sessions;
        c.path = existing_file(j.at("sessions"), at_key(where, "sessions"), base);
        return c;
    }
    const auto& s = j.at("synth");
    if (s.is_string() && s.get<std::string>() == "default") {
        c.kind = CorpusSource::Kind::synth_default;
    } else {
        c.kind = CorpusSource::Kind::synth_spec;
        c.path = existing_file(s, at_key(where, "synth"), base);
    }
    if (j.contains("seed"))
        c.seed = get_uint(j.at("seed"), at_key(where, "seed"), 0, UINT64_MAX);
    return c;
}

std::vector<double> levels_at(const json& j, const std::string& where)
{
    if (!j.is_array() || j.empty())
        throw ConfigError(where, "expected a non-empty list of levels");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto w = where + "/" + std::to_string(i);
        if (!j[i].is_number())
            throw ConfigError(w, "expected a number");
        double v = j[i].get<double>();
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError(w, "level must be in [0, 1]");
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> scopes_at(const json& j, const std::string& where)
{
    if (!j.is_array() || j.empty())
        throw ConfigError(where, "expected a non-empty list of scopes");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto w = where + "/" + std::to_string(i);
        auto s = get_string(j[i], w);
        if (s != "all")
            convert(w, [&] { return protocol_from_string(s); });
        out.push_back(s);
    }
    return out;
}

} // namespace

nlohmann::ordered_json CorpusSource::to_json() const
{
    nlohmann::ordered_json j;
    switch (kind) {
    case Kind::synth_default:
        j["synth"] = "default";
        break;
    case Kind::synth_spec:
        j["synth"] = path.filename().string();
        break;
    case Kind::sessions:
        j["sessions"] = path.filename().string();
        break;
    }
    if (seed)
        j["seed"] = *seed;
    return j;
}

ForestSettings forest_settings_from_json(const nlohmann::json& j, const std::string& where, ForestSettings base)
{
    only_keys(j, where, {"n_trees", "max_depth", "features_per_split", "folds"});
    if (j.contains("n_trees"))
        base.n_trees = get_uint(j.at("n_trees"), at_key(where, "n_trees"), 1, 10000);
    if (j.contains("folds"))
        base.folds = get_uint(j.at("folds"), at_key(where, "folds"), 2, 100);
    if (j.contains("max_depth")) {
        const auto w = at_key(where, "max_depth");
        const auto& a = j.at("max_depth");
        if (!a.is_array() || a.empty())
            throw ConfigError(w, "expected a non-empty list");
        base.max_depth.clear();
        for (std::size_t i = 0; i < a.size(); ++i)
            base.max_depth.push_back(convert(w + "/" + std::to_string(i), [&] { return depth_from_json(a[i]); }));
    }
    if (j.contains("features_per_split")) {
        const auto w = at_key(where, "features_per_split");
        const auto& a = j.at("features_per_split");
        if (!a.is_array() || a.empty())
            throw ConfigError(w, "expected a non-empty list");
        base.features_per_split.clear();
        for (std::size_t i = 0; i < a.size(); ++i) {
            convert(w + "/" + std::to_string(i), [&] { return resolve_features_per_split(a[i], 16); });
            base.features_per_split.push_back(a[i]);
        }
    }
    return base;
}

SuiteConfig SuiteConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir)
{
    only_keys(j, "", {"corpus", "seed", "train_days", "window_minutes", "min_count", "count_unit", "min_windows",
                      "forest", "single_session", "multi_session", "window_sweep", "evasion"});
    SuiteConfig c;
    if (!j.contains("corpus"))
        throw ConfigError("/corpus", "required");
    c.corpus = corpus_at(j.at("corpus"), "/corpus", base_dir);

    auto& p = c.pipeline;
    if (j.contains("seed"))
        p.seed = get_uint(j.at("seed"), "/seed", 0, UINT64_MAX);
    if (j.contains("train_days"))
        p.train_days = static_cast<int>(get_uint(j.at("train_days"), "/train_days", 1, 365));
    if (j.contains("window_minutes"))
        c.window_minutes = minutes_at(j.at("window_minutes"), "/window_minutes");
    if (j.contains("min_count"))
        p.min_count = get_uint(j.at("min_count"), "/min_count", 1, UINT64_MAX);
    if (j.contains("count_unit"))
        p.count_unit = convert("/count_unit",
                               [&] { return occurrence_unit_from_string(get_string(j.at("count_unit"), "/count_unit")); });
    if (j.contains("min_windows"))
        p.min_windows = get_uint(j.at("min_windows"), "/min_windows", 1, UINT64_MAX);
    if (j.contains("forest"))
        p.forest = forest_settings_from_json(j.at("forest"), "/forest");

    if (j.contains("single_session")) {
        const auto& s = j.at("single_session");
        only_keys(s, "/single_session", {"protocols", "fallback"});
        SingleSettings ss;
        auto set = protocols_at(s.contains("protocols") ? s.at("protocols") : json("all"), "/single_session/protocols");
        ss.protocols.assign(set.begin(), set.end());
        if (s.contains("fallback"))
            ss.fallback = convert("/single_session/fallback", [&] {
                return fallback_from_string(get_string(s.at("fallback"), "/single_session/fallback"));
            });
        c.single = ss;
    }

    if (j.contains("multi_session")) {
        const auto& runs = j.at("multi_session");
        if (!runs.is_array())
            throw ConfigError("/multi_session", "expected a list of runs");
        std::set<std::string> names;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto w = "/multi_session/" + std::to_string(i);
            const auto& r = runs[i];
            only_keys(r, w, {"name", "protocols", "taxonomy", "window_minutes"});
            MultiRun run;
            run.setup.protocols = protocols_at(r.contains("protocols") ? r.at("protocols") : json("all"),
                                               w + "/protocols");
            run.setup.window_minutes =
                r.contains("window_minutes") ? minutes_at(r.at("window_minutes"), w + "/window_minutes")
                                             : c.window_minutes;
            if (r.contains("taxonomy"))
                run.setup.taxonomy = convert(w + "/taxonomy", [&] {
                    return taxonomy_from_string(get_string(r.at("taxonomy"), w + "/taxonomy"));
                });
            run.name = r.contains("name") ? get_string(r.at("name"), w + "/name")
                                          : protocol_set_name(run.setup.protocols) + "_" + to_string(run.setup.taxonomy);
            if (run.name.empty() || run.name.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789_+-") !=
                                        std::string::npos)
                throw ConfigError(w + "/name", "names use lowercase letters, digits, '_', '+' and '-'");
            if (!names.insert(run.name).second)
                throw ConfigError(w + "/name", "duplicate run name " + run.name);
            c.multi.push_back(std::move(run));
        }
    }

    if (j.contains("window_sweep")) {
        const auto& s = j.at("window_sweep");
        only_keys(s, "/window_sweep", {"minutes", "protocols", "forest"});
        SweepSettings sw;
        if (!s.contains("minutes") || !s.at("minutes").is_array() || s.at("minutes").empty())
            throw ConfigError("/window_sweep/minutes", "expected a non-empty list");
        for (std::size_t i = 0; i < s.at("minutes").size(); ++i)
            sw.minutes.push_back(minutes_at(s.at("minutes")[i], "/window_sweep/minutes/" + std::to_string(i)));
        if (!s.contains("protocols") || !s.at("protocols").is_array() || s.at("protocols").empty())
            throw ConfigError("/window_sweep/protocols", "expected a non-empty list of protocol sets");
        for (std::size_t i = 0; i < s.at("protocols").size(); ++i)
            sw.protocol_sets.push_back(
                protocols_at(s.at("protocols")[i], "/window_sweep/protocols/" + std::to_string(i)));
        sw.forest = s.contains("forest") ? forest_settings_from_json(s.at("forest"), "/window_sweep/forest", p.forest)
                                         : p.forest;
        c.sweep = std::move(sw);
    }

    if (j.contains("evasion")) {
        const auto& e = j.at("evasion");
        only_keys(e, "/evasion", {"protocols", "window_minutes", "levels", "scopes"});
        EvasionSettings ev;
        if (e.contains("protocols"))
            ev.protocols = protocols_at(e.at("protocols"), "/evasion/protocols");
        ev.window_minutes =
            e.contains("window_minutes") ? minutes_at(e.at("window_minutes"), "/evasion/window_minutes") : c.window_minutes;
        if (!e.contains("levels"))
            throw ConfigError("/evasion/levels", "required");
        ev.levels = levels_at(e.at("levels"), "/evasion/levels");
        if (!e.contains("scopes"))
            throw ConfigError("/evasion/scopes", "required");
        ev.scopes = scopes_at(e.at("scopes"), "/evasion/scopes");
        for (std::size_t i = 0; i < ev.scopes.size(); ++i)
            if (ev.scopes[i] != "all" && !ev.protocols.count(protocol_from_string(ev.scopes[i])))
                throw ConfigError("/evasion/scopes/" + std::to_string(i), "scope outside the evasion protocols");
        c.evasion = std::move(ev);
    }
    return c;
}

SuiteConfig SuiteConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

std::vector<SessionRecord> load_corpus(const CorpusSource& source)
{
    switch (source.kind) {
    case CorpusSource::Kind::sessions:
        return read_jsonl_file(source.path);
    case CorpusSource::Kind::synth_spec:
    case CorpusSource::Kind::synth_default: {
        CorpusSpec spec;
        if (source.kind == CorpusSource::Kind::synth_default) {
            spec = default_spec();
        } else {
            std::ifstream in(source.path);
            if (!in)
                throw IoError("cannot read spec " + source.path.string());
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(in);
            } catch (const nlohmann::json::parse_error& e) {
                throw InvalidSpec(source.path.string() + ": " + e.what());
            }
            spec = CorpusSpec::from_json(j);
        }
        if (source.seed)
            spec.seed = *source.seed;
        return generate(spec);
    }
    }
    return {};
}

} // namespace osfp
