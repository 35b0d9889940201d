#include "osfp/fingerprint.hpp"

#include "osfp/error.hpp"

#include <charconv>

namespace osfp {

std::string_view to_string(Protocol p) noexcept
{
    switch (p) {
    case Protocol::tcp:
        return "tcp";
    case Protocol::tls:
        return "tls";
    case Protocol::http:
        return "http";
    }
    return "?";
}

Protocol protocol_from_string(std::string_view s)
{
    if (s == "tcp")
        return Protocol::tcp;
    if (s == "tls")
        return Protocol::tls;
    if (s == "http")
        return Protocol::http;
    throw Error("unknown protocol '" + std::string(s) + "'");
}

bool is_data_bearing(Protocol p, std::uint32_t code) noexcept
{
    switch (p) {
    case Protocol::tcp:
        return code == 2 || code == 3;
    case Protocol::tls:
        return code == 10 || code == 11 || code == 16;
    case Protocol::http:
        return code == 0;
    }
    return false;
}

namespace {

void append_escaped(std::string& out, const std::string& data)
{
    for (char ch : data) {
        if (ch == '\\' || ch == '(' || ch == ')')
            out.push_back('\\');
        out.push_back(ch);
    }
}

void append_element(std::string& out, const Element& e)
{
    out.push_back('(');
    out += std::to_string(e.code);
    if (e.data) {
        out.push_back('=');
        append_escaped(out, *e.data);
    }
    out.push_back(')');
}

void check_segment(Protocol p, const std::vector<Element>& elems, std::size_t first, std::size_t last,
                   bool data_allowed)
{
    for (std::size_t i = first; i < last; ++i) {
        const Element& e = elems[i];
        bool want = data_allowed && is_data_bearing(p, e.code);
        if (want != e.data.has_value()) {
            throw InvalidFingerprint(std::string(to_string(p)) + " element " + std::to_string(i) + " (code " +
                                     std::to_string(e.code) + (want ? ") requires data" : ") must not carry data"));
        }
    }
}

} // namespace

Fingerprint Fingerprint::make(Protocol p, int ttl, std::size_t boundary, std::vector<Element> elements)
{
    auto body = std::make_shared<Body>();
    body->protocol = p;
    body->ttl = ttl;
    body->boundary = boundary;
    body->elements = std::move(elements);

    std::string& c = body->canonical;
    c += to_string(p);
    c.push_back('/');
    if (p == Protocol::tcp) {
        c += std::to_string(ttl);
        c.push_back(':');
    }
    for (std::size_t i = 0; i < body->elements.size(); ++i) {
        if (p == Protocol::tls && i == boundary)
            c.push_back('|');
        append_element(c, body->elements[i]);
    }
    if (p == Protocol::tls && boundary == body->elements.size())
        c.push_back('|');
    return Fingerprint(std::move(body));
}

Fingerprint Fingerprint::tcp(int ttl, std::vector<Element> options)
{
    if (ttl < 0 || ttl > 255)
        throw InvalidFingerprint("tcp ttl out of range: " + std::to_string(ttl));
    check_segment(Protocol::tcp, options, 0, options.size(), true);
    return make(Protocol::tcp, ttl, options.size(), std::move(options));
}

Fingerprint Fingerprint::tls(std::vector<Element> ciphers, std::vector<Element> extensions)
{
    if (ciphers.empty() && extensions.empty())
        throw InvalidFingerprint("tls fingerprint has no elements");
    std::size_t boundary = ciphers.size();
    std::vector<Element> all = std::move(ciphers);
    all.insert(all.end(), std::make_move_iterator(extensions.begin()), std::make_move_iterator(extensions.end()));
    check_segment(Protocol::tls, all, 0, boundary, false);
    check_segment(Protocol::tls, all, boundary, all.size(), true);
    return make(Protocol::tls, 0, boundary, std::move(all));
}

Fingerprint Fingerprint::http(std::vector<Element> elements)
{
    if (elements.empty())
        throw InvalidFingerprint("http fingerprint has no elements");
    check_segment(Protocol::http, elements, 0, elements.size(), true);
    std::size_t n = elements.size();
    return make(Protocol::http, 0, n, std::move(elements));
}

Fingerprint Fingerprint::user_agent(std::string value)
{
    std::vector<Element> e;
    e.push_back(Element{0, std::move(value)});
    return http(std::move(e));
}

std::span<const Element> Fingerprint::ciphers() const noexcept
{
    return elements().subspan(0, body_->boundary);
}

std::span<const Element> Fingerprint::extensions() const noexcept
{
    return elements().subspan(body_->boundary);
}

bool operator==(const Fingerprint& a, const Fingerprint& b) noexcept
{
    if (a.body_ == b.body_)
        return true;
    return a.protocol() == b.protocol() && a.ttl() == b.ttl() && a.segment_boundary() == b.segment_boundary() &&
           a.body_->elements == b.body_->elements;
}

std::string canonicalize(const Fingerprint& fp)
{
    return fp.canonical();
}

namespace {

class CanonicalParser {
public:
    CanonicalParser(std::string_view s, std::size_t pos) : s_(s), pos_(pos) {}

    Fingerprint parse()
    {
        Protocol p = parse_tag();
        expect('/');
        if (p == Protocol::tcp) {
            std::size_t at = pos_;
            std::uint32_t ttl = parse_number();
            if (ttl > 255)
                throw GrammarError("ttl out of range", at);
            expect(':');
            auto opts = parse_elements(p, true);
            return Fingerprint::tcp(static_cast<int>(ttl), std::move(opts));
        }
        if (p == Protocol::tls) {
            auto ciphers = parse_elements(p, false);
            expect('|');
            auto exts = parse_elements(p, true);
            if (ciphers.empty() && exts.empty())
                throw GrammarError("empty tls fingerprint", pos_);
            return Fingerprint::tls(std::move(ciphers), std::move(exts));
        }
        std::size_t at = pos_;
        auto elems = parse_elements(p, true);
        if (elems.empty())
            throw GrammarError("empty http fingerprint", at);
        return Fingerprint::http(std::move(elems));
    }

    std::size_t pos() const noexcept { return pos_; }

private:
    Protocol parse_tag()
    {
        for (Protocol p : all_protocols) {
            auto tag = to_string(p);
            if (s_.substr(pos_, tag.size()) == tag && pos_ + tag.size() < s_.size() && s_[pos_ + tag.size()] == '/') {
                pos_ += tag.size();
                return p;
            }
        }
        throw GrammarError("expected protocol tag", pos_);
    }

    void expect(char ch)
    {
        if (pos_ >= s_.size() || s_[pos_] != ch)
            throw GrammarError(std::string("expected '") + ch + "'", pos_);
        ++pos_;
    }

    std::uint32_t parse_number()
    {
        std::size_t start = pos_;
        if (pos_ >= s_.size() || s_[pos_] < '0' || s_[pos_] > '9')
            throw GrammarError("expected decimal number", pos_);
        if (s_[pos_] == '0' && pos_ + 1 < s_.size() && s_[pos_ + 1] >= '0' && s_[pos_ + 1] <= '9')
            throw GrammarError("leading zero in number", pos_);
        std::uint32_t value = 0;
        auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), value);
        if (ec != std::errc())
            throw GrammarError("number out of range", start);
        pos_ = static_cast<std::size_t>(ptr - s_.data());
        return value;
    }

    std::vector<Element> parse_elements(Protocol p, bool data_allowed)
    {
        std::vector<Element> out;
        while (pos_ < s_.size() && s_[pos_] == '(') {
            std::size_t at = pos_;
            ++pos_;
            Element e;
            e.code = parse_number();
            if (pos_ < s_.size() && s_[pos_] == '=') {
                ++pos_;
                e.data = parse_data();
            }
            expect(')');
            bool want = data_allowed && is_data_bearing(p, e.code);
            if (want != e.data.has_value())
                throw GrammarError(want ? "element requires data" : "element must not carry data", at);
            out.push_back(std::move(e));
        }
        return out;
    }

    std::string parse_data()
    {
        std::string out;
        while (pos_ < s_.size()) {
            char ch = s_[pos_];
            if (ch == ')')
                return out;
            if (ch == '(')
                throw GrammarError("unescaped '(' in data", pos_);
            if (ch == '\\') {
                if (pos_ + 1 >= s_.size())
                    throw GrammarError("dangling escape", pos_);
                char next = s_[pos_ + 1];
                if (next != '\\' && next != '(' && next != ')')
                    throw GrammarError("invalid escape", pos_);
                out.push_back(next);
                pos_ += 2;
                continue;
            }
            out.push_back(ch);
            ++pos_;
        }
        throw GrammarError("unterminated element data", pos_);
    }

    std::string_view s_;
    std::size_t pos_;
};

} // namespace

Fingerprint parse_canonical_prefix(std::string_view s, std::size_t& pos)
{
    CanonicalParser parser(s, pos);
    Fingerprint fp = parser.parse();
    pos = parser.pos();
    return fp;
}

Fingerprint parse_canonical(std::string_view s)
{
    std::size_t pos = 0;
    Fingerprint fp = parse_canonical_prefix(s, pos);
    if (pos != s.size())
        throw GrammarError("trailing characters", pos);
    return fp;
}

std::string composite_key(std::span<const std::string> canonical_parts)
{
    std::string out;
    for (std::size_t i = 0; i < canonical_parts.size(); ++i) {
        if (i)
            out.push_back('+');
        out += canonical_parts[i];
    }
    return out;
}

std::vector<Fingerprint> parse_composite_key(std::string_view s)
{
    std::vector<Fingerprint> out;
    std::size_t pos = 0;
    out.push_back(parse_canonical_prefix(s, pos));
    while (pos < s.size()) {
        if (s[pos] != '+')
            throw GrammarError("expected '+' between fingerprints", pos);
        ++pos;
        out.push_back(parse_canonical_prefix(s, pos));
    }
    return out;
}

CategoryLabel::CategoryLabel(std::string name) : name_(std::move(name))
{
    if (name_.empty())
        throw Error("category label must be non-empty");
}

} // namespace osfp
