#include "osfp/experiment.hpp"

#include "osfp/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace osfp {

HyperGrid ForestSettings::grid(std::size_t n_features) const
{
    HyperGrid g;
    g.max_depth = max_depth;
    for (const auto& f : features_per_split)
        g.features_per_split.push_back(resolve_features_per_split(f, n_features));
    g.folds = folds;
    return g;
}

nlohmann::ordered_json ForestSettings::to_json() const
{
    nlohmann::ordered_json depths = nlohmann::ordered_json::array();
    for (const auto& d : max_depth)
        depths.push_back(d ? nlohmann::ordered_json(*d) : nlohmann::ordered_json("unlimited"));
    nlohmann::ordered_json fps = nlohmann::ordered_json::array();
    for (const auto& f : features_per_split)
        fps.push_back(nlohmann::ordered_json::parse(f.dump()));
    return {{"n_trees", n_trees}, {"max_depth", depths}, {"features_per_split", fps}, {"folds", folds}};
}

TimeSplit split_by_time(std::span<const SessionRecord> sessions, int train_days)
{
    if (train_days < 1)
        throw Error("train_days must be at least 1");
    TimeSplit split;
    if (sessions.empty())
        return split;
    double first = sessions.front().start_time;
    for (const auto& s : sessions)
        first = std::min(first, s.start_time);
    split.boundary = std::floor(first / 86400.0) * 86400.0 + 86400.0 * train_days;
    for (const auto& s : sessions) {
        if (!s.label)
            continue;
        (s.start_time < split.boundary ? split.train : split.test).push_back(s);
    }
    return split;
}

namespace {

std::vector<CategoryLabel> labels_of(std::span<const HostWindow> windows)
{
    std::vector<CategoryLabel> y;
    y.reserve(windows.size());
    for (const auto& w : windows)
        y.push_back(*w.label);
    return y;
}

nlohmann::ordered_json labels_json(std::span<const CategoryLabel> labels)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& l : labels)
        j.push_back(l.str());
    return j;
}

} // namespace

ExperimentResult run_experiment(const TimeSplit& split, const ExperimentSetup& setup, const PipelineSettings& settings)
{
    ExperimentResult r;
    r.setup = setup;
    r.split_time = split.boundary;

    auto train = restrict_protocols(build_windows(split.train, setup.window_minutes), setup.protocols);
    auto test = restrict_protocols(build_windows(split.test, setup.window_minutes), setup.protocols);

    auto filtered = filter_rare_classes(std::move(train), settings.min_windows);
    r.removed_labels = filtered.removed;
    std::set<CategoryLabel> retained;
    for (const auto& w : filtered.windows)
        retained.insert(*w.label);

    const LabelTaxonomy tax(setup.taxonomy);
    r.train_windows = apply_taxonomy(std::move(filtered.windows), tax);
    std::vector<HostWindow> kept;
    for (auto& w : test) {
        if (w.label && retained.count(*w.label))
            kept.push_back(std::move(w));
        else
            ++r.dropped_test_windows;
    }
    r.test_windows = apply_taxonomy(std::move(kept), tax);

    std::set<CategoryLabel> classes;
    for (const auto& w : r.train_windows)
        classes.insert(*w.label);
    if (classes.size() < 2)
        throw InsufficientClasses(std::to_string(classes.size()) + " label(s) left after filtering rare classes");

    r.dictionary = build_feature_dictionary(r.train_windows, settings.min_count, settings.count_unit);
    const BinaryMatrix Xtr = to_matrix(r.train_windows, r.dictionary, setup.protocols);
    const BinaryMatrix Xte = to_matrix(r.test_windows, r.dictionary, setup.protocols);
    const auto ytr = labels_of(r.train_windows);

    r.cv = grid_search_cv(Xtr, ytr, settings.forest.grid(Xtr.cols()), substream_seed(settings.seed, 11),
                          settings.forest.n_trees, settings.workers);
    ForestParams params;
    params.n_trees = settings.forest.n_trees;
    params.max_depth = r.cv.max_depth;
    params.features_per_split = r.cv.features_per_split;
    params.workers = settings.workers;
    r.model = fit_forest(Xtr, ytr, params, substream_seed(settings.seed, 12));
    r.model.set_dictionary_hash(r.dictionary.hash());

    r.matrix = ConfusionMatrix({classes.begin(), classes.end()});
    const auto predicted = r.model.predict(Xte);
    for (std::size_t i = 0; i < predicted.size(); ++i)
        r.matrix.add(*r.test_windows[i].label, predicted[i]);
    return r;
}

nlohmann::ordered_json ExperimentResult::to_json() const
{
    nlohmann::ordered_json dict;
    for (auto p : setup.protocols)
        dict["size"][std::string(to_string(p))] = dictionary.entries(p).size();
    dict["min_count"] = dictionary.min_count();
    dict["hash"] = dictionary.hash();
    return {{"protocols", protocol_set_name(setup.protocols)},
            {"window_minutes", setup.window_minutes},
            {"taxonomy", to_string(setup.taxonomy)},
            {"split_time", split_time},
            {"train_windows", train_windows.size()},
            {"test_windows", test_windows.size()},
            {"dropped_test_windows", dropped_test_windows},
            {"removed_labels", labels_json(removed_labels)},
            {"labels", labels_json(matrix.labels())},
            {"dictionary", std::move(dict)},
            {"grid_search", cv.to_json()},
            {"accuracy", accuracy()},
            {"confusion", matrix.to_json()}};
}

SingleResult run_single(const TimeSplit& split, Protocol protocol, Fallback fallback)
{
    const auto model = train_single(split.train, protocol, fallback);
    return {protocol, evaluate_single(model, split.test)};
}

nlohmann::ordered_json SingleResult::to_json() const
{
    return {{"protocol", std::string(to_string(protocol))},
            {"accuracy", evaluation.matrix.accuracy()},
            {"evaluated", evaluation.matrix.total()},
            {"abstained", evaluation.abstained},
            {"skipped", evaluation.skipped},
            {"confusion", evaluation.matrix.to_json()}};
}

std::vector<SweepPoint> run_window_sweep(const TimeSplit& split, std::span<const int> minutes,
                                         std::span<const ProtocolSet> protocol_sets, const PipelineSettings& settings)
{
    std::vector<SweepPoint> out;
    for (const auto& ps : protocol_sets) {
        for (int m : minutes) {
            ExperimentSetup setup{ps, m, TaxonomyName::original};
            out.push_back({ps, m, run_experiment(split, setup, settings).accuracy()});
        }
    }
    return out;
}

namespace {

std::string fixed(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

std::string sweep_csv(std::span<const SweepPoint> points)
{
    std::string out = "protocols,window_minutes,accuracy\n";
    for (const auto& p : points)
        out += protocol_set_name(p.protocols) + "," + std::to_string(p.window_minutes) + "," + fixed(p.accuracy) + "\n";
    return out;
}

EvasionReport run_evasion_sweep(const ExperimentResult& experiment, const ObfuscationMapping& mapping,
                                std::span<const double> levels, std::span<const std::string> scopes,
                                std::uint64_t seed)
{
    if (experiment.setup.taxonomy != TaxonomyName::original)
        throw Error("evasion runs against a model trained on the original labels");
    const auto& protocols = experiment.setup.protocols;
    const TargetSampler sampler = TargetSampler::from_windows(experiment.train_windows);

    EvasionReport report;
    report.baseline = experiment.accuracy();
    report.mapping = mapping;
    std::vector<std::uint8_t> row;
    for (std::size_t si = 0; si < scopes.size(); ++si) {
        ObfuscationConfig config;
        if (scopes[si] == "all") {
            config.scope = protocols;
        } else {
            const Protocol p = protocol_from_string(scopes[si]);
            if (!protocols.count(p))
                throw Error("evasion scope " + scopes[si] + " is not among the model's protocols");
            config.scope = {p};
        }
        for (std::size_t li = 0; li < levels.size(); ++li) {
            config.fraction = levels[li];
            EvasionPoint point{scopes[si], levels[li], 0.0, {}};
            std::size_t correct = 0;
            for (std::size_t wi = 0; wi < experiment.test_windows.size(); ++wi) {
                const auto& w = experiment.test_windows[wi];
                Rng rng(substream_seed(seed, (si << 16) | li, wi));
                const HostWindow changed = obfuscate_window(w, mapping, sampler, config, rng, &point.stats);
                row = vectorize(changed, experiment.dictionary, protocols).bits;
                correct += experiment.model.predict(row) == *w.label;
            }
            point.accuracy = experiment.test_windows.empty()
                                 ? 0.0
                                 : static_cast<double>(correct) / static_cast<double>(experiment.test_windows.size());
            report.points.push_back(std::move(point));
        }
    }
    return report;
}

nlohmann::ordered_json EvasionReport::to_json() const
{
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const auto& p : points)
        pts.push_back({{"scope", p.scope},
                       {"level", p.level},
                       {"accuracy", p.accuracy},
                       {"replaced", p.stats.replaced},
                       {"dropped", p.stats.dropped}});
    return {{"baseline", baseline}, {"mapping", mapping_to_json(mapping)}, {"points", std::move(pts)}};
}

std::string EvasionReport::to_csv() const
{
    std::string out = "scope,level,accuracy\n";
    for (const auto& p : points) {
        char level[32];
        std::snprintf(level, sizeof level, "%.2f", p.level);
        out += p.scope + "," + level + "," + fixed(p.accuracy) + "\n";
    }
    return out;
}

CountStore count_windows(std::span<const HostWindow> windows, const ProtocolSet& protocols)
{
    CountStore store;
    std::vector<std::string> keys;
    for (const auto& w : windows) {
        if (!w.label)
            continue;
        keys.clear();
        for (auto p : all_protocols)
            if (protocols.count(p))
                for (const auto& [fp, n] : w.of(p))
                    keys.push_back(fp);
        if (!keys.empty())
            store.observe(composite_key(keys), *w.label);
    }
    return store;
}

} // namespace osfp
