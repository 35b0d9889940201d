#include "osfp/assembler.hpp"
#include "osfp/capture.hpp"
#include "osfp/config.hpp"
#include "osfp/digest.hpp"
#include "osfp/error.hpp"
#include "osfp/experiment.hpp"
#include "osfp/infogain.hpp"
#include "osfp/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* default_key_env = "OSFP_PSEUDONYM_KEY";

/// Exit 2: bad flags, bad config, missing inputs.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::optional<std::uint64_t> seed;
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    fs::path out_dir = ".";
};

ordered_json provenance(const std::string& command, const std::string& config_hash, std::uint64_t seed,
                        const std::string& corpus_hash)
{
    return {{"tool", "osfp"},
            {"version", OSFP_VERSION},
            {"command", command},
            {"config_sha256", config_hash},
            {"seed", seed},
            {"corpus_sha256", corpus_hash}};
}

void require_file(const fs::path& p, const std::string& what)
{
    if (!fs::is_regular_file(p))
        throw UsageError(what + " not found: " + p.string());
}

void write_file(const fs::path& path, const std::string& content)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw osfp::IoError("cannot write " + path.string());
    out << content;
    if (!out)
        throw osfp::IoError("write failed: " + path.string());
}

std::string dump(const ordered_json& j) { return j.dump(2, ' ', false, ordered_json::error_handler_t::replace) + "\n"; }

void log(const std::string& msg) { std::cerr << msg << '\n'; }

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
    std::vector<std::string> inputs;
    std::string key_file;
    std::string key_env = default_key_env;
    std::string output;
    double idle_timeout = 300.0;
};

int cmd_extract(const Globals& g, const ExtractArgs& a)
{
    for (const auto& in : a.inputs)
        require_file(in, "capture");
    std::optional<osfp::PseudonymKey> key;
    if (!a.key_file.empty()) {
        require_file(a.key_file, "key file");
        key = osfp::PseudonymKey::from_file(a.key_file);
    } else {
        if (!std::getenv(a.key_env.c_str()))
            throw UsageError("no pseudonym key: set " + a.key_env + " or pass --key-file");
        key = osfp::PseudonymKey::from_env(a.key_env);
    }

    osfp::AssemblerOptions opts;
    opts.idle_timeout = a.idle_timeout;
    osfp::ExtractCounters total;
    std::vector<osfp::SessionRecord> sessions;
    for (const auto& in : a.inputs) {
        osfp::CaptureReader reader(in);
        osfp::SessionAssembler assembler(*key, opts);
        while (auto pkt = reader.next())
            assembler.push(std::move(*pkt), sessions);
        assembler.finish(sessions);
        auto c = assembler.counters();
        c.unsupported_link += reader.unsupported_link();
        if (reader.truncated()) {
            ++c.truncated_captures;
            log("warning: " + in + ": capture ends mid-record; later packets are lost");
        }
        total += c;
    }
    std::stable_sort(sessions.begin(), sessions.end(), [](const auto& x, const auto& y) {
        return x.start_time != y.start_time ? x.start_time < y.start_time : x.key < y.key;
    });

    std::ostringstream body;
    for (const auto& s : sessions)
        osfp::write_jsonl(body, s);
    if (a.output == "-")
        std::cout << body.str() << std::flush;
    else
        write_file(a.output.empty() ? g.out_dir / "sessions.jsonl" : fs::path(a.output), body.str());
    std::cerr << total.to_json().dump() << '\n';
    return 0;
}

// ---------------------------------------------------------------- infogain

struct InfogainArgs {
    std::string sessions;
    std::string unit = "flow";
    int window_minutes = 60;
    std::size_t top_k = 10;
};

int cmd_infogain(const Globals& g, const InfogainArgs& a)
{
    require_file(a.sessions, "sessions file");
    osfp::CountUnit unit;
    try {
        unit = osfp::count_unit_from_string(a.unit);
    } catch (const osfp::Error& e) {
        throw UsageError(e.what());
    }
    if (a.window_minutes < 1 || a.window_minutes > 1440)
        throw UsageError("--window-minutes must be in [1, 1440]");

    auto all = osfp::read_jsonl_file(a.sessions);
    std::vector<osfp::SessionRecord> labeled;
    for (auto& s : all)
        if (s.label)
            labeled.push_back(std::move(s));
    if (labeled.empty())
        throw osfp::UnlabeledData("no labeled sessions in " + a.sessions);

    const ordered_json options = {{"unit", a.unit}, {"window_minutes", a.window_minutes}, {"top_k", a.top_k}};
    ordered_json report;
    report["provenance"] = provenance("infogain", osfp::sha256_hex(options.dump()), g.seed.value_or(0),
                                      osfp::sha256_file_hex(a.sessions));
    report["options"] = options;

    const char* names[] = {"TCP/IP", "TLS", "HTTP"};
    std::vector<osfp::InfoGainRow> rows;
    auto windows = osfp::build_windows(labeled, a.window_minutes);
    const osfp::ProtocolSet every{osfp::Protocol::tcp, osfp::Protocol::tls, osfp::Protocol::http};
    {
        auto w = osfp::restrict_protocols(windows, every);
        rows.push_back({"All - Multi", osfp::information_gain(osfp::count_windows(w, every))});
    }
    for (auto p : osfp::all_protocols) {
        const osfp::ProtocolSet one{p};
        auto w = osfp::restrict_protocols(windows, one);
        auto store = osfp::count_windows(w, one);
        if (!store.empty())
            rows.push_back({std::string(names[static_cast<int>(p)]) + " - Multi", osfp::information_gain(store)});
    }
    ordered_json top = ordered_json::object();
    for (auto p : osfp::all_protocols) {
        auto store = osfp::count_sessions(labeled, p, unit, a.window_minutes * 60.0);
        if (store.empty())
            continue;
        rows.push_back({names[static_cast<int>(p)], osfp::information_gain(store)});
        auto best = osfp::top_fingerprints_by_gain(store, a.top_k);
        write_file(g.out_dir / ("infogain_top_" + std::string(osfp::to_string(p)) + ".csv"), osfp::table2_csv(best));
        ordered_json list = ordered_json::array();
        for (const auto& f : best)
            list.push_back({{"fingerprint", f.fingerprint}, {"normalized_gain", f.normalized_gain}, {"count", f.count}});
        top[std::string(osfp::to_string(p))] = std::move(list);
    }

    ordered_json table = ordered_json::array();
    for (const auto& r : rows) {
        ordered_json row = {{"data_type", r.data_type}};
        const auto full = r.report.to_json();
        for (auto& [k, v] : full.items())
            if (k != "per_fingerprint")
                row[k] = v;
        table.push_back(std::move(row));
    }
    report["table"] = std::move(table);
    report["top_fingerprints"] = std::move(top);
    write_file(g.out_dir / "infogain_table.csv", osfp::table1_csv(rows));
    write_file(g.out_dir / "infogain.json", dump(report));
    std::cout << osfp::table1_csv(rows);
    return 0;
}

// ---------------------------------------------------------------- experiment / evade

struct Suite {
    osfp::SuiteConfig config;
    std::string config_hash;
    std::vector<osfp::SessionRecord> corpus;
    std::string corpus_hash;
};

Suite load_suite(const Globals& g, const std::string& path)
{
    require_file(path, "config");
    Suite s;
    s.config = osfp::SuiteConfig::load(path);
    s.config_hash = osfp::sha256_file_hex(path);
    if (g.seed) {
        s.config.pipeline.seed = *g.seed;
        if (s.config.corpus.kind != osfp::CorpusSource::Kind::sessions)
            s.config.corpus.seed = *g.seed;
    }
    s.config.pipeline.workers = g.workers;
    s.corpus = osfp::load_corpus(s.config.corpus);
    s.corpus_hash = osfp::corpus_hash(s.corpus);
    log("corpus: " + std::to_string(s.corpus.size()) + " sessions, sha256 " + s.corpus_hash);
    return s;
}

ordered_json settings_json(const osfp::SuiteConfig& c)
{
    const auto& p = c.pipeline;
    return {{"corpus", c.corpus.to_json()},
            {"seed", p.seed},
            {"train_days", p.train_days},
            {"window_minutes", c.window_minutes},
            {"min_count", p.min_count},
            {"count_unit", p.count_unit == osfp::OccurrenceUnit::window ? "window" : "flow"},
            {"min_windows", p.min_windows},
            {"forest", p.forest.to_json()}};
}

std::string safe_name(std::string s)
{
    std::replace(s.begin(), s.end(), '+', '_');
    return s;
}

int cmd_experiment(const Globals& g, const std::string& config_path)
{
    auto suite = load_suite(g, config_path);
    const auto& c = suite.config;
    auto split = osfp::split_by_time(suite.corpus, c.pipeline.train_days);

    ordered_json report;
    report["provenance"] = provenance("experiment", suite.config_hash, c.pipeline.seed, suite.corpus_hash);
    report["settings"] = settings_json(c);
    report["corpus"] = osfp::summarize(suite.corpus).to_json();
    report["split_time"] = split.boundary;

    std::map<osfp::Protocol, double> single_acc;
    if (c.single) {
        ordered_json runs = ordered_json::array();
        for (auto p : c.single->protocols) {
            auto r = osfp::run_single(split, p, c.single->fallback);
            const std::string name(osfp::to_string(p));
            log("single " + name + ": accuracy " + fmt(r.evaluation.matrix.accuracy()));
            write_file(g.out_dir / ("single_" + name + "_confusion.csv"), r.evaluation.matrix.to_csv());
            single_acc[p] = r.evaluation.matrix.accuracy();
            auto j = r.to_json();
            j["fallback"] = osfp::to_string(c.single->fallback);
            runs.push_back(std::move(j));
        }
        report["single_session"] = std::move(runs);
    }

    std::map<std::pair<osfp::ProtocolSet, osfp::TaxonomyName>, double> multi_acc;
    if (!c.multi.empty()) {
        ordered_json runs = ordered_json::array();
        for (const auto& run : c.multi) {
            auto r = osfp::run_experiment(split, run.setup, c.pipeline);
            log("multi " + run.name + ": accuracy " + fmt(r.accuracy()));
            write_file(g.out_dir / ("multi_" + safe_name(run.name) + "_confusion.csv"), r.matrix.to_csv());
            if (run.setup.window_minutes == c.window_minutes)
                multi_acc[{run.setup.protocols, run.setup.taxonomy}] = r.accuracy();
            ordered_json j = {{"name", run.name}};
            const auto body = r.to_json();
            for (auto& [k, v] : body.items())
                j[k] = v;
            runs.push_back(std::move(j));
        }
        report["multi_session"] = std::move(runs);
    }

    std::vector<osfp::SweepPoint> sweep;
    if (c.sweep) {
        auto settings = c.pipeline;
        settings.forest = c.sweep->forest;
        sweep = osfp::run_window_sweep(split, c.sweep->minutes, c.sweep->protocol_sets, settings);
        ordered_json pts = ordered_json::array();
        for (const auto& p : sweep) {
            log("sweep " + osfp::protocol_set_name(p.protocols) + " " + std::to_string(p.window_minutes) +
                " min: accuracy " + fmt(p.accuracy));
            pts.push_back({{"protocols", osfp::protocol_set_name(p.protocols)},
                           {"window_minutes", p.window_minutes},
                           {"accuracy", p.accuracy}});
        }
        report["window_sweep"] = {{"forest", c.sweep->forest.to_json()}, {"points", std::move(pts)}};
        write_file(g.out_dir / "window_sweep.csv", osfp::sweep_csv(sweep));
    }

    // Orderings between runs that the config happens to contain.
    ordered_json checks = ordered_json::object();
    const osfp::ProtocolSet every{osfp::Protocol::tcp, osfp::Protocol::tls, osfp::Protocol::http};
    auto multi = [&](const osfp::ProtocolSet& s, osfp::TaxonomyName t) -> std::optional<double> {
        auto it = multi_acc.find({s, t});
        return it == multi_acc.end() ? std::nullopt : std::optional(it->second);
    };
    for (auto [p, acc] : single_acc)
        if (auto m = multi({p}, osfp::TaxonomyName::original))
            checks["multi_ge_single"][std::string(osfp::to_string(p))] = *m >= acc;
    if (auto all = multi(every, osfp::TaxonomyName::original)) {
        for (auto p : osfp::all_protocols)
            if (auto m = multi({p}, osfp::TaxonomyName::original))
                checks["all_ge_protocol"][std::string(osfp::to_string(p))] = *all >= *m;
        if (auto gen = multi(every, osfp::TaxonomyName::general))
            checks["general_ge_original"] = *gen >= *all;
        if (auto vul = multi(every, osfp::TaxonomyName::vulnerable))
            checks["vulnerable_ge_original"] = *vul >= *all;
    }
    for (const auto& a : sweep)
        for (const auto& b : sweep)
            if (a.protocols == b.protocols && a.window_minutes == 60 && b.window_minutes == 5)
                checks["window_60_ge_5"][osfp::protocol_set_name(a.protocols)] = a.accuracy >= b.accuracy;
    report["checks"] = std::move(checks);

    write_file(g.out_dir / "report.json", dump(report));
    return 0;
}

int cmd_evade(const Globals& g, const std::string& config_path)
{
    auto suite = load_suite(g, config_path);
    const auto& c = suite.config;
    if (!c.evasion)
        throw osfp::ConfigError("/evasion", "required by the evade command");
    const auto& ev = *c.evasion;
    auto split = osfp::split_by_time(suite.corpus, c.pipeline.train_days);

    osfp::ExperimentSetup setup{ev.protocols, ev.window_minutes, osfp::TaxonomyName::original};
    auto experiment = osfp::run_experiment(split, setup, c.pipeline);
    log("clean baseline: accuracy " + fmt(experiment.accuracy()));
    auto mapping = osfp::build_cross_mapping(osfp::host_counts(split.train));
    auto result = osfp::run_evasion_sweep(experiment, mapping, ev.levels, ev.scopes, c.pipeline.seed);

    ordered_json report;
    report["provenance"] = provenance("evade", suite.config_hash, c.pipeline.seed, suite.corpus_hash);
    report["settings"] = settings_json(c);
    report["experiment"] = {{"protocols", osfp::protocol_set_name(ev.protocols)},
                            {"window_minutes", ev.window_minutes},
                            {"taxonomy", "original"},
                            {"dictionary_hash", experiment.dictionary.hash()},
                            {"grid_search", experiment.cv.to_json()}};
    const auto body = result.to_json();
    for (auto& [k, v] : body.items())
        report[k] = v;
    write_file(g.out_dir / "evasion.json", dump(report));
    write_file(g.out_dir / "evasion.csv", result.to_csv());
    for (const auto& p : result.points)
        log("evade " + p.scope + " " + fmt(p.level) + ": accuracy " + fmt(p.accuracy));
    return 0;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::string spec = "default";
    std::string output;
};

int cmd_synth(const Globals& g, const SynthArgs& a)
{
    osfp::CorpusSpec spec;
    std::string spec_text;
    if (a.spec == "default") {
        spec = osfp::default_spec();
        spec_text = spec.to_json().dump();
    } else {
        require_file(a.spec, "spec");
        std::ifstream in(a.spec, std::ios::binary);
        spec_text.assign(std::istreambuf_iterator<char>(in), {});
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(spec_text);
        } catch (const nlohmann::json::parse_error& e) {
            throw osfp::InvalidSpec(a.spec + ": " + e.what());
        }
        spec = osfp::CorpusSpec::from_json(j);
    }
    if (g.seed)
        spec.seed = *g.seed;
    auto corpus = osfp::generate(spec);

    std::ostringstream body;
    for (const auto& s : corpus)
        osfp::write_jsonl(body, s);
    write_file(a.output.empty() ? g.out_dir / "corpus.jsonl" : fs::path(a.output), body.str());

    ordered_json summary;
    summary["provenance"] = provenance("synth", osfp::sha256_hex(spec_text), spec.seed, osfp::corpus_hash(corpus));
    summary["summary"] = osfp::summarize(corpus).to_json();
    std::cout << dump(summary);
    return 0;
}

bool is_config_error(const std::exception& e)
{
    return dynamic_cast<const UsageError*>(&e) || dynamic_cast<const osfp::ConfigError*>(&e) ||
           dynamic_cast<const osfp::InvalidSpec*>(&e) || dynamic_cast<const osfp::KeyTooShort*>(&e);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Passive OS fingerprinting toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", OSFP_VERSION);

    Globals g;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Override the configured seed")->expected(1);
    app.add_option("--workers", g.workers, "Worker threads")->check(CLI::Range(1, 1024));
    std::string out_dir = ".";
    app.add_option("--out-dir", out_dir, "Directory for output files");

    ExtractArgs ex;
    auto* extract = app.add_subcommand("extract", "Turn pcap/pcapng captures into session JSONL");
    extract->add_option("captures", ex.inputs, "Capture files")->required();
    extract->add_option("--key-file", ex.key_file, "File holding the pseudonym key");
    extract->add_option("--key-env", ex.key_env, "Environment variable holding the pseudonym key");
    extract->add_option("-o,--output", ex.output, "Output path ('-' for stdout)");
    extract->add_option("--idle-timeout", ex.idle_timeout, "Idle seconds before a session is flushed")
        ->check(CLI::PositiveNumber);

    InfogainArgs ig;
    auto* infogain = app.add_subcommand("infogain", "Entropy and information-gain tables");
    infogain->add_option("sessions", ig.sessions, "Labeled session JSONL")->required();
    infogain->add_option("--unit", ig.unit, "Counting unit for single-session rows: flow, host or window");
    infogain->add_option("--window-minutes", ig.window_minutes, "Window length for windowed rows");
    infogain->add_option("--top-k", ig.top_k, "Fingerprints listed per protocol");

    std::string exp_config;
    auto* experiment = app.add_subcommand("experiment", "Run the single/multi-session experiment suite");
    experiment->add_option("config", exp_config, "Experiment config JSON")->required();

    std::string evade_config;
    auto* evade = app.add_subcommand("evade", "Fingerprint replacement sweep");
    evade->add_option("config", evade_config, "Experiment config JSON with an evasion block")->required();

    SynthArgs sy;
    auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic session corpus");
    synth->add_option("--spec", sy.spec, "Corpus spec JSON, or 'default'");
    synth->add_option("-o,--output", sy.output, "Output path");

    for (auto* sub : {extract, infogain, experiment, evade, synth})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    if (seed_opt->count())
        g.seed = seed;
    g.out_dir = out_dir;

    try {
        if (*extract)
            return cmd_extract(g, ex);
        if (*infogain)
            return cmd_infogain(g, ig);
        if (*experiment)
            return cmd_experiment(g, exp_config);
        if (*evade)
            return cmd_evade(g, evade_config);
        if (*synth)
            return cmd_synth(g, sy);
    } catch (const std::exception& e) {
        std::cerr << "osfp: error: " << e.what() << '\n';
        return is_config_error(e) ? 2 : 1;
    }
    return 2;
}
