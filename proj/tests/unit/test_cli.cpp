#include "osfp/synth.hpp"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path fixtures = OSFP_FIXTURE_DIR;

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s)
{
    std::ofstream out(p, std::ios::binary);
    out << s;
}

fs::path scratch(const std::string& name)
{
    auto d = fs::temp_directory_path() / ("osfp_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string quote(const std::string& s)
{
    std::string out = "'";
    for (char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out += c;
    }
    return out + "'";
}

/// Runs the CLI with the given arguments and environment prefix.
Run cli(const std::vector<std::string>& args, const std::string& env = "env -u OSFP_PSEUDONYM_KEY")
{
    static int counter = 0;
    const auto dir = fs::temp_directory_path();
    const auto out = dir / ("osfp_cli_out_" + std::to_string(counter));
    const auto err = dir / ("osfp_cli_err_" + std::to_string(counter++));
    std::string cmd = env + " " + quote(OSFP_CLI);
    for (const auto& a : args)
        cmd += " " + quote(a);
    cmd += " >" + quote(out.string()) + " 2>" + quote(err.string());
    Run r;
    int status = std::system(cmd.c_str());
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    fs::remove(out);
    fs::remove(err);
    return r;
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

/// The bundled spec with every population cut to a fifth.
fs::path reduced_spec(const fs::path& dir)
{
    auto spec = osfp::default_spec();
    for (auto& p : spec.profiles)
        p.host_count = std::max<std::uint64_t>(p.host_count / 5, 12);
    auto path = dir / "spec.json";
    spit(path, spec.to_json().dump(1));
    return path;
}

double entropy(const std::map<std::string, double>& counts)
{
    double n = 0, h = 0;
    for (auto& [k, c] : counts)
        n += c;
    for (auto& [k, c] : counts)
        h -= c / n * std::log2(c / n);
    return h;
}

/// H(C) and H(C|F) computed directly from joint counts.
std::pair<double, double> entropies(const std::map<std::string, std::map<std::string, double>>& joint)
{
    std::map<std::string, double> labels;
    double n = 0;
    for (auto& [f, row] : joint)
        for (auto& [c, k] : row) {
            labels[c] += k;
            n += k;
        }
    double cond = 0;
    for (auto& [f, row] : joint) {
        double nf = 0;
        for (auto& [c, k] : row)
            nf += k;
        cond += nf / n * entropy(row);
    }
    return {entropy(labels), cond};
}

const json& row(const json& report, const std::string& name)
{
    for (const auto& r : report.at("table"))
        if (r.at("data_type") == name)
            return r;
    FAIL("missing row " << name);
    return report;
}

} // namespace

TEST_CASE("extract reproduces the golden sessions")
{
    auto dir = scratch("extract");
    for (auto capture : {"session_capture.pcap", "session_capture.pcapng"}) {
        auto out = dir / "s.jsonl";
        auto r = cli({"extract", (fixtures / capture).string(), "--key-file", (fixtures / "fixture.key").string(),
                       "-o", out.string()});
        CHECK(r.code == 0);
        CHECK(slurp(out) == slurp(fixtures / "session_capture.jsonl"));
        auto counters = json::parse(r.err.substr(r.err.find('{')));
        CHECK(counters["sessions"] == 6);
        CHECK(counters["packets"] == 20);
    }
    auto r = cli({"extract", (fixtures / "session_capture.pcap").string(), "-o", "-"},
                  "OSFP_PSEUDONYM_KEY='fixture pseudonym key 0123456789'");
    CHECK(r.code == 0);
    CHECK(r.out == slurp(fixtures / "session_capture.jsonl"));
}

TEST_CASE("extract tolerates truncation and empty captures")
{
    auto dir = scratch("truncated");
    auto r = cli({"extract", (fixtures / "session_truncated.pcap").string(), "--key-file",
                   (fixtures / "fixture.key").string(), "-o", (dir / "t.jsonl").string()});
    CHECK(r.code == 0);
    CHECK(r.err.find("warning") != std::string::npos);
    CHECK(slurp(dir / "t.jsonl") == slurp(fixtures / "session_truncated.jsonl"));
    auto counters = json::parse(r.err.substr(r.err.find('{')));
    CHECK(counters["truncated_captures"] == 1);
    CHECK(counters["malformed"]["tls"] == 1);

    r = cli({"extract", (fixtures / "empty.pcap").string(), "--key-file", (fixtures / "fixture.key").string(), "-o",
              (dir / "e.jsonl").string()});
    CHECK(r.code == 0);
    CHECK(slurp(dir / "e.jsonl").empty());
}

TEST_CASE("extract key errors")
{
    auto dir = scratch("keys");
    auto r = cli({"extract", (fixtures / "session_capture.pcap").string(), "-o", (dir / "x.jsonl").string()});
    CHECK(r.code == 2);
    spit(dir / "short.key", "short");
    r = cli({"extract", (fixtures / "session_capture.pcap").string(), "--key-file", (dir / "short.key").string(),
              "-o", (dir / "x.jsonl").string()});
    CHECK(r.code == 2);
    r = cli({"extract", (dir / "missing.pcap").string(), "--key-file", (fixtures / "fixture.key").string()});
    CHECK(r.code == 2);
}

TEST_CASE("usage errors")
{
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
    CHECK(cli({"infogain", (fixtures / "session_capture.jsonl").string(), "--unit", "day"}).code == 2);
    CHECK(cli({"experiment", "/nonexistent/config.json"}).code == 2);
}

TEST_CASE("infogain refuses unlabeled sessions")
{
    auto dir = scratch("unlabeled");
    auto r = cli({"--out-dir", dir.string(), "infogain", (fixtures / "session_capture.jsonl").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("labeled") != std::string::npos);
}

TEST_CASE("infogain on perfectly separated data")
{
    auto dir = scratch("separated");
    std::string lines;
    for (int i = 0; i < 40; ++i) {
        const bool mac = i % 2;
        json s = {{"ts", 1491800000 + i * 30}, {"src", "host" + std::to_string(i % 8)}, {"dst", "srv"},
                  {"sp", 40000 + i}, {"dp", 443},
                  {"tcp", {{"ttl", mac ? 64 : 128}, {"opts", {json::array({2, "1460"}), 1}}}},
                  {"label", mac ? "OSX 10.12.4" : "Win 10.0.1058"}};
        lines += s.dump() + "\n";
    }
    spit(dir / "s.jsonl", lines);
    auto r = cli({"--out-dir", dir.string(), "infogain", (dir / "s.jsonl").string()});
    REQUIRE(r.code == 0);
    auto rep = load(dir / "infogain.json");
    const auto& tcp = row(rep, "TCP/IP");
    CHECK(tcp["h_posterior"].get<double>() == doctest::Approx(0.0));
    CHECK(tcp["gain"].get<double>() == doctest::Approx(1.0));
    CHECK(fs::exists(dir / "infogain_table.csv"));
    CHECK(fs::exists(dir / "infogain_top_tcp.csv"));
    CHECK(r.out.rfind("data_type,h_c,h_c_given_f,gain\n", 0) == 0);
}

TEST_CASE("infogain matches an independent computation")
{
    auto dir = scratch("random");
    std::mt19937_64 rng(17);
    std::map<std::string, std::map<std::string, double>> flow_joint, window_joint;
    std::map<std::pair<std::string, long>, std::pair<std::string, std::set<std::string>>> windows;
    std::string lines;
    for (int i = 0; i < 3000; ++i) {
        const int host = static_cast<int>(rng() % 60);
        const std::string label = "L" + std::to_string(host % 7);
        const int mss = 1200 + static_cast<int>(rng() % (3 + host % 7)) * 10;
        const int ttl = host % 2 ? 64 : 128;
        const long ts = 1491782400 + static_cast<long>(rng() % (2 * 86400));
        const std::string fp = "tcp/" + std::to_string(ttl) + ":(2=" + std::to_string(mss) + ")";
        json s = {{"ts", ts}, {"src", "h" + std::to_string(host)}, {"dst", "srv"}, {"sp", 1000 + i}, {"dp", 80},
                  {"tcp", {{"ttl", ttl}, {"opts", {json::array({2, std::to_string(mss)})}}}}, {"label", label}};
        lines += s.dump() + "\n";
        flow_joint[fp][label] += 1;
        auto& w = windows[{"h" + std::to_string(host), ts / 3600}];
        w.first = label;
        w.second.insert(fp);
    }
    for (const auto& [key, w] : windows) {
        std::string composite;
        for (const auto& fp : w.second)
            composite += (composite.empty() ? "" : "+") + fp;
        window_joint[composite][w.first] += 1;
    }
    spit(dir / "s.jsonl", lines);
    auto r = cli({"--out-dir", dir.string(), "infogain", (dir / "s.jsonl").string()});
    REQUIRE(r.code == 0);
    auto rep = load(dir / "infogain.json");

    auto [hc, hcf] = entropies(flow_joint);
    const auto& flow = row(rep, "TCP/IP");
    CHECK(std::fabs(flow["h_prior"].get<double>() - hc) < 1e-9);
    CHECK(std::fabs(flow["h_posterior"].get<double>() - hcf) < 1e-9);
    CHECK(std::fabs(flow["gain"].get<double>() - (hc - hcf)) < 1e-9);

    auto [whc, whcf] = entropies(window_joint);
    const auto& multi = row(rep, "TCP/IP - Multi");
    CHECK(std::fabs(multi["h_prior"].get<double>() - whc) < 1e-9);
    CHECK(std::fabs(multi["h_posterior"].get<double>() - whcf) < 1e-9);
}

TEST_CASE("synth is reproducible and validates its spec")
{
    auto dir = scratch("synth");
    auto spec = reduced_spec(dir);
    auto a = cli({"synth", "--spec", spec.string(), "-o", (dir / "a.jsonl").string()});
    auto b = cli({"synth", "--spec", spec.string(), "-o", (dir / "b.jsonl").string()});
    REQUIRE(a.code == 0);
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
    CHECK(a.out == b.out);
    auto ja = json::parse(a.out);
    CHECK(ja["provenance"]["tool"] == "osfp");
    CHECK(ja["summary"]["sessions"].get<std::uint64_t>() > 0);

    auto c = cli({"--seed", "99", "synth", "--spec", spec.string(), "-o", (dir / "c.jsonl").string()});
    REQUIRE(c.code == 0);
    CHECK(json::parse(c.out)["provenance"]["corpus_sha256"] != ja["provenance"]["corpus_sha256"]);

    auto one = osfp::default_spec();
    one.profiles.resize(1);
    spit(dir / "one.json", one.to_json().dump());
    CHECK(cli({"synth", "--spec", (dir / "one.json").string(), "-o", (dir / "x.jsonl").string()}).code == 2);
    spit(dir / "broken.json", "{");
    CHECK(cli({"synth", "--spec", (dir / "broken.json").string(), "-o", (dir / "x.jsonl").string()}).code == 2);
}

TEST_CASE("experiment and evade on a reduced corpus")
{
    auto dir = scratch("experiment");
    auto spec = reduced_spec(dir);
    json config = {
        {"corpus", {{"synth", spec.filename().string()}, {"seed", 4}}},
        {"min_count", 3},
        {"min_windows", 5},
        {"forest", {{"n_trees", 10}, {"max_depth", {"unlimited"}}, {"features_per_split", {"sqrt"}}}},
        {"single_session", {{"protocols", {"tcp"}}}},
        {"multi_session", {{{"name", "tcp"}, {"protocols", {"tcp"}}}, {{"name", "all"}, {"protocols", "all"}}}},
        {"window_sweep", {{"minutes", {5, 15, 30, 45, 60}}, {"protocols", {{"tcp"}, {"tls"}}}}},
        {"evasion", {{"levels", {0, 0.5, 1}}, {"scopes", {"tcp"}}}},
    };
    spit(dir / "config.json", config.dump(1));

    auto r = cli({"--out-dir", dir.string(), "experiment", (dir / "config.json").string()});
    REQUIRE(r.code == 0);
    auto rep = load(dir / "report.json");
    CHECK(rep["provenance"]["command"] == "experiment");
    CHECK(rep["multi_session"].size() == 2);
    CHECK(rep["checks"].contains("all_ge_protocol"));
    CHECK(fs::exists(dir / "single_tcp_confusion.csv"));
    CHECK(fs::exists(dir / "multi_all_confusion.csv"));
    auto sweep = slurp(dir / "window_sweep.csv");
    CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 11);
    int tcp_rows = 0;
    std::istringstream lines(sweep);
    for (std::string line; std::getline(lines, line);)
        tcp_rows += line.rfind("tcp,", 0) == 0;
    CHECK(tcp_rows == 5);

    auto e = cli({"--out-dir", dir.string(), "evade", (dir / "config.json").string()});
    REQUIRE(e.code == 0);
    auto ev = load(dir / "evasion.json");
    CHECK(ev["points"].size() == 3);
    for (const auto& p : ev["points"])
        CHECK(p["scope"] == "tcp");
    CHECK(ev["points"][0]["accuracy"] == ev["baseline"]);

    config.erase("evasion");
    spit(dir / "no_evasion.json", config.dump());
    CHECK(cli({"--out-dir", dir.string(), "evade", (dir / "no_evasion.json").string()}).code == 2);

    config["corpus"] = {{"sessions", "missing.jsonl"}};
    spit(dir / "bad.json", config.dump());
    auto bad = cli({"--out-dir", dir.string(), "experiment", (dir / "bad.json").string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("missing.jsonl") != std::string::npos);
}
