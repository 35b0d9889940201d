#include "osfp/session.hpp"

#include "osfp/error.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace osfp {

const std::optional<Fingerprint>& SessionRecord::fingerprint(Protocol p) const noexcept
{
    switch (p) {
    case Protocol::tcp:
        return tcp_fp;
    case Protocol::tls:
        return tls_fp;
    case Protocol::http:
        break;
    }
    return http_fp;
}

std::optional<Fingerprint>& SessionRecord::fingerprint(Protocol p) noexcept
{
    return const_cast<std::optional<Fingerprint>&>(std::as_const(*this).fingerprint(p));
}

void SessionRecord::validate() const
{
    if (!tcp_fp && !tls_fp && !http_fp)
        throw Error("session record carries no fingerprint");
    for (Protocol p : all_protocols) {
        const auto& fp = fingerprint(p);
        if (fp && fp->protocol() != p)
            throw Error("fingerprint protocol does not match its field");
    }
    if (key.src_id.empty() || key.dst_id.empty())
        throw Error("session pseudonyms must be non-empty");
}

namespace {

nlohmann::ordered_json element_json(const Element& e)
{
    if (e.data)
        return nlohmann::ordered_json::array({e.code, *e.data});
    return e.code;
}

Element element_from_json(const nlohmann::json& j)
{
    if (j.is_number_unsigned())
        return Element{j.get<std::uint32_t>(), std::nullopt};
    if (j.is_array() && j.size() == 2 && j[0].is_number_unsigned() && j[1].is_string())
        return Element{j[0].get<std::uint32_t>(), j[1].get<std::string>()};
    throw Error("element must be an integer or [code, string]");
}

std::vector<Element> elements_from_json(const nlohmann::json& j)
{
    if (!j.is_array())
        throw Error("element list must be an array");
    std::vector<Element> out;
    out.reserve(j.size());
    for (const auto& e : j)
        out.push_back(element_from_json(e));
    return out;
}

} // namespace

nlohmann::ordered_json to_json(const SessionRecord& r)
{
    nlohmann::ordered_json j;
    j["ts"] = r.start_time;
    j["src"] = r.key.src_id;
    j["dst"] = r.key.dst_id;
    j["sp"] = r.key.src_port;
    j["dp"] = r.key.dst_port;
    if (r.tcp_fp) {
        auto opts = nlohmann::ordered_json::array();
        for (const auto& e : r.tcp_fp->elements())
            opts.push_back(element_json(e));
        j["tcp"] = {{"ttl", r.tcp_fp->ttl()}, {"opts", std::move(opts)}};
    }
    if (r.tls_fp) {
        auto elems = nlohmann::ordered_json::array();
        for (const auto& e : r.tls_fp->elements())
            elems.push_back(element_json(e));
        j["tls"] = {{"elems", std::move(elems)}, {"ciphers", r.tls_fp->segment_boundary()}};
    }
    if (r.http_fp) {
        auto elems = r.http_fp->elements();
        if (elems.size() != 1 || elems[0].code != 0)
            throw Error("http fingerprint must be a single User-Agent element for JSON output");
        j["http"] = {{"ua", *elems[0].data}};
    }
    if (r.label)
        j["label"] = r.label->str();
    return j;
}

SessionRecord session_from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw Error("session record must be a JSON object");
    SessionRecord r;
    r.start_time = j.at("ts").get<double>();
    r.key.src_id = j.at("src").get<std::string>();
    r.key.dst_id = j.at("dst").get<std::string>();
    r.key.src_port = j.at("sp").get<std::uint16_t>();
    r.key.dst_port = j.at("dp").get<std::uint16_t>();
    if (auto it = j.find("tcp"); it != j.end())
        r.tcp_fp = Fingerprint::tcp(it->at("ttl").get<int>(), elements_from_json(it->at("opts")));
    if (auto it = j.find("tls"); it != j.end()) {
        auto elems = elements_from_json(it->at("elems"));
        std::size_t ciphers = elems.size();
        if (auto c = it->find("ciphers"); c != it->end())
            ciphers = c->get<std::size_t>();
        if (ciphers > elems.size())
            throw Error("tls cipher count exceeds element count");
        std::vector<Element> exts(elems.begin() + static_cast<std::ptrdiff_t>(ciphers), elems.end());
        elems.resize(ciphers);
        r.tls_fp = Fingerprint::tls(std::move(elems), std::move(exts));
    }
    if (auto it = j.find("http"); it != j.end())
        r.http_fp = Fingerprint::user_agent(it->at("ua").get<std::string>());
    if (auto it = j.find("label"); it != j.end())
        r.label = CategoryLabel(it->get<std::string>());
    r.validate();
    return r;
}

void write_jsonl(std::ostream& out, const SessionRecord& r)
{
    out << to_json(r).dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace) << '\n';
}

std::vector<SessionRecord> read_jsonl(std::istream& in)
{
    std::vector<SessionRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            out.push_back(session_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw Error("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<SessionRecord> read_jsonl_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    return read_jsonl(in);
}

} // namespace osfp
