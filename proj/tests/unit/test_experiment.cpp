#include "osfp/config.hpp"
#include "osfp/error.hpp"
#include "osfp/experiment.hpp"
#include "osfp/synth.hpp"

#include <filesystem>
#include <fstream>

#include <doctest.h>

using namespace osfp;
namespace fs = std::filesystem;

namespace {

SessionRecord flow(std::string host, double ts, std::optional<std::string> label)
{
    SessionRecord r;
    r.key = {std::move(host), "s", 1, 2};
    r.start_time = ts;
    r.tcp_fp = parse_canonical("tcp/64:");
    if (label)
        r.label = CategoryLabel(*label);
    return r;
}

/// The bundled spec at a fifth of its population.
const std::vector<SessionRecord>& reduced_corpus()
{
    static const std::vector<SessionRecord> corpus = [] {
        auto spec = default_spec();
        for (auto& p : spec.profiles)
            p.host_count = std::max<std::uint64_t>(p.host_count / 5, 12);
        spec.seed = 5;
        return generate(spec);
    }();
    return corpus;
}

PipelineSettings quick_settings()
{
    PipelineSettings s;
    s.min_count = 3;
    s.min_windows = 5;
    s.forest.n_trees = 15;
    s.forest.max_depth = {std::nullopt};
    s.forest.features_per_split = {"sqrt"};
    s.seed = 3;
    return s;
}

std::string config_error(const nlohmann::json& j)
{
    try {
        SuiteConfig::from_json(j, OSFP_CONFIG_DIR);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "";
}

} // namespace

TEST_CASE("time split on whole days")
{
    std::vector<SessionRecord> v{flow("a", 86400 * 10 + 500, "x"), flow("a", 86400 * 11 - 1, "x"),
                                 flow("a", 86400 * 11, "x"), flow("b", 86400 * 12, std::nullopt)};
    auto s = split_by_time(v, 1);
    CHECK(s.boundary == 86400.0 * 11);
    CHECK(s.train.size() == 2);
    CHECK(s.test.size() == 1);
    CHECK(split_by_time({}, 3).train.empty());
    CHECK_THROWS(split_by_time(v, 0));
}

TEST_CASE("window counting for the gain table")
{
    HostWindow a;
    a.host_id = "a";
    a.label = CategoryLabel("x");
    ++a.of(Protocol::tcp)["tcp/64:(1)"];
    ++a.of(Protocol::tls)["tls/(47)|"];
    HostWindow b = a;
    b.of(Protocol::tls).clear();
    std::vector<HostWindow> v{a, b};
    auto all = count_windows(v, {Protocol::tcp, Protocol::tls});
    CHECK(all.joint("tcp/64:(1)+tls/(47)|", CategoryLabel("x")) == 1);
    CHECK(all.joint("tcp/64:(1)", CategoryLabel("x")) == 1);
    auto tls = count_windows(v, {Protocol::tls});
    CHECK(tls.total() == 1);
}

TEST_CASE("config validation names the field")
{
    auto base = nlohmann::json::parse(R"({"corpus": {"synth": "default"}})");
    CHECK(config_error(base).empty());

    auto j = base;
    j["forest"] = {{"n_trees", 0}};
    CHECK(config_error(j) == "/forest/n_trees");
    j = base;
    j["colour"] = 1;
    CHECK(config_error(j) == "/colour");
    j = nlohmann::json::object();
    CHECK(config_error(j) == "/corpus");
    j = base;
    j["corpus"] = {{"sessions", "no-such-file.jsonl"}};
    CHECK(config_error(j) == "/corpus/sessions");
    j = base;
    j["multi_session"] = {{{"name", "Bad Name"}}};
    CHECK(config_error(j) == "/multi_session/0/name");
    j = base;
    j["multi_session"] = {{{"protocols", "udp"}}};
    CHECK(config_error(j) == "/multi_session/0/protocols");
    j = base;
    j["evasion"] = {{"protocols", "tcp"}, {"levels", {0, 1}}, {"scopes", {"tls"}}};
    CHECK(config_error(j) == "/evasion/scopes/0");
    j = base;
    j["evasion"] = {{"levels", {0, 1.5}}, {"scopes", {"all"}}};
    CHECK(config_error(j) == "/evasion/levels/1");
    j = base;
    j["window_sweep"] = {{"minutes", {5, 0}}, {"protocols", {"tcp"}}};
    CHECK(config_error(j) == "/window_sweep/minutes/1");
    j = base;
    j["forest"] = {{"features_per_split", {"third"}}};
    CHECK(config_error(j) == "/forest/features_per_split/0");

    CHECK_THROWS_AS(SuiteConfig::load("/nonexistent/config.json"), IoError);
}

TEST_CASE("the bundled config parses")
{
    auto c = SuiteConfig::load(fs::path(OSFP_CONFIG_DIR) / "paper_repro.json");
    CHECK(c.corpus.kind == CorpusSource::Kind::synth_default);
    CHECK(c.pipeline.train_days == 3);
    CHECK(c.multi.size() == 6);
    REQUIRE(c.sweep);
    CHECK(c.sweep->minutes.size() == 5);
    CHECK(c.sweep->forest.n_trees == 25);
    CHECK(c.sweep->forest.folds == 3);
    REQUIRE(c.evasion);
    CHECK(c.evasion->scopes.size() == 4);
    REQUIRE(c.single);
    CHECK(c.single->protocols.size() == 3);
}

TEST_CASE("a reduced experiment separates operating systems")
{
    const auto& corpus = reduced_corpus();
    auto split = split_by_time(corpus, 3);
    REQUIRE_FALSE(split.train.empty());
    REQUIRE_FALSE(split.test.empty());
    auto settings = quick_settings();

    auto all = run_experiment(split, ExperimentSetup{}, settings);
    CHECK(all.accuracy() > 0.8);
    CHECK(all.matrix.total() == all.test_windows.size());
    CHECK(all.model.n_features() == all.dictionary.size(all.setup.protocols));
    CHECK(all.model.dictionary_hash() == all.dictionary.hash());
    auto j = all.to_json();
    CHECK(j.contains("confusion"));

    auto again = run_experiment(split, ExperimentSetup{}, settings);
    CHECK(again.model == all.model);
    CHECK(again.accuracy() == all.accuracy());

    auto general = run_experiment(split, ExperimentSetup{{Protocol::tcp, Protocol::tls, Protocol::http}, 60,
                                                         TaxonomyName::general},
                                  settings);
    CHECK(general.matrix.labels().size() < all.matrix.labels().size());

    auto tls_single = run_single(split, Protocol::tls, Fallback::abstain);
    CHECK(tls_single.evaluation.matrix.total() > 0);
    CHECK(tls_single.to_json().contains("accuracy"));
}

TEST_CASE("too few classes")
{
    auto split = split_by_time(reduced_corpus(), 3);
    auto settings = quick_settings();
    settings.min_windows = 1000000;
    CHECK_THROWS_AS(run_experiment(split, ExperimentSetup{}, settings), InsufficientClasses);
}

TEST_CASE("window sweep shape")
{
    auto split = split_by_time(reduced_corpus(), 3);
    auto settings = quick_settings();
    settings.forest.n_trees = 5;
    const int minutes[] = {15, 60};
    const ProtocolSet sets[] = {{Protocol::tcp}, {Protocol::tls}};
    auto points = run_window_sweep(split, minutes, sets, settings);
    REQUIRE(points.size() == 4);
    CHECK(points[0].protocols == ProtocolSet{Protocol::tcp});
    CHECK(points[0].window_minutes == 15);
    CHECK(points[1].window_minutes == 60);
    auto csv = sweep_csv(points);
    CHECK(csv.rfind("protocols,window_minutes,accuracy\ntcp,15,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("evasion sweep")
{
    auto split = split_by_time(reduced_corpus(), 3);
    auto exp = run_experiment(split, ExperimentSetup{}, quick_settings());
    auto mapping = build_cross_mapping(host_counts(split.train));
    const double levels[] = {0.0, 1.0};
    const std::string scopes[] = {"tcp", "all"};
    auto report = run_evasion_sweep(exp, mapping, levels, scopes, 11);
    CHECK(report.baseline == exp.accuracy());
    REQUIRE(report.points.size() == 4);
    CHECK(report.points[0].scope == "tcp");
    CHECK(report.points[0].accuracy == exp.accuracy());
    CHECK(report.points[2].level == 0.0);
    CHECK(report.points[2].accuracy == exp.accuracy());
    CHECK(report.points[3].accuracy < report.points[0].accuracy);
    CHECK(report.points[3].stats.replaced > 0);

    auto again = run_evasion_sweep(exp, mapping, levels, scopes, 11);
    CHECK(again.to_csv() == report.to_csv());
    CHECK(report.to_csv().rfind("scope,level,accuracy\n", 0) == 0);

    const std::string only_tcp[] = {"tcp"};
    auto one = run_evasion_sweep(exp, mapping, levels, only_tcp, 11);
    for (const auto& p : one.points)
        CHECK(p.scope == "tcp");
}
