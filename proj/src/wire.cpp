#include "osfp/wire.hpp"

#include "osfp/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <string_view>

namespace osfp {

namespace {

constexpr std::size_t ethernet_header = 14;
constexpr std::size_t ipv4_min_header = 20;
constexpr std::size_t ipv6_header = 40;
constexpr std::size_t tcp_min_header = 20;

constexpr std::uint16_t ethertype_ipv4 = 0x0800;
constexpr std::uint16_t ethertype_ipv6 = 0x86dd;
constexpr std::uint16_t ethertype_vlan = 0x8100;
constexpr std::uint16_t ethertype_qinq = 0x88a8;

constexpr std::uint8_t ip_proto_tcp = 6;

constexpr std::uint8_t tls_content_handshake = 22;
constexpr std::uint8_t tls_handshake_client_hello = 1;
constexpr std::size_t tls_record_header = 5;
constexpr std::size_t tls_max_record = (1u << 14) + 2048;

std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t at)
{
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

std::uint32_t be24(std::span<const std::uint8_t> b, std::size_t at)
{
    return (std::uint32_t{b[at]} << 16) | (std::uint32_t{b[at + 1]} << 8) | b[at + 2];
}

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at)
{
    return (std::uint32_t{b[at]} << 24) | be24(b, at + 1);
}

std::optional<TcpSegment> decode_tcp_header(std::span<const std::uint8_t> seg, TcpSegment out)
{
    if (seg.size() < tcp_min_header)
        throw MalformedPacket("tcp header truncated");
    std::size_t data_offset = static_cast<std::size_t>(seg[12] >> 4) * 4;
    if (data_offset < tcp_min_header || data_offset > seg.size())
        throw MalformedPacket("tcp data offset inconsistent with segment length");
    out.src_port = be16(seg, 0);
    out.dst_port = be16(seg, 2);
    out.seq = be32(seg, 4);
    out.flags = seg[13];
    out.options = seg.subspan(tcp_min_header, data_offset - tcp_min_header);
    out.payload = seg.subspan(data_offset);
    return out;
}

std::optional<TcpSegment> decode_ipv4(std::span<const std::uint8_t> ip)
{
    if (ip.size() < ipv4_min_header)
        throw MalformedPacket("ipv4 header truncated");
    std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
    std::size_t total = be16(ip, 2);
    if (ihl < ipv4_min_header || ihl > ip.size() || total < ihl || total > ip.size())
        throw MalformedPacket("ipv4 lengths inconsistent with byte count");
    std::uint16_t frag = be16(ip, 6);
    if ((frag & 0x1fff) != 0 || ip[9] != ip_proto_tcp)
        return std::nullopt;
    TcpSegment seg;
    seg.src = IpAddress::from_v4(ip.subspan<12, 4>());
    seg.dst = IpAddress::from_v4(ip.subspan<16, 4>());
    seg.ttl = ip[8];
    // Frames may carry link padding past the IP total length.
    return decode_tcp_header(ip.subspan(ihl, total - ihl), seg);
}

std::optional<TcpSegment> decode_ipv6(std::span<const std::uint8_t> ip)
{
    if (ip.size() < ipv6_header)
        throw MalformedPacket("ipv6 header truncated");
    std::size_t payload_len = be16(ip, 4);
    if (ipv6_header + payload_len > ip.size())
        throw MalformedPacket("ipv6 payload length exceeds byte count");
    auto body = ip.subspan(ipv6_header, payload_len);
    std::uint8_t next = ip[6];
    // Walk hop-by-hop, routing and destination-options headers.
    while (next == 0 || next == 43 || next == 60) {
        if (body.size() < 8)
            throw MalformedPacket("ipv6 extension header truncated");
        std::size_t len = (static_cast<std::size_t>(body[1]) + 1) * 8;
        if (len > body.size())
            throw MalformedPacket("ipv6 extension header overruns packet");
        next = body[0];
        body = body.subspan(len);
    }
    if (next != ip_proto_tcp)
        return std::nullopt;
    TcpSegment seg;
    seg.src = IpAddress::from_v6(ip.subspan<8, 16>());
    seg.dst = IpAddress::from_v6(ip.subspan<24, 16>());
    seg.ttl = ip[7];
    return decode_tcp_header(body, seg);
}

std::string hex_lower(std::span<const std::uint8_t> bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

std::uint32_t tls_code(std::uint16_t v, const WireOptions& opts)
{
    return (opts.normalize_grease && is_grease(v)) ? grease_sentinel : v;
}

// Parses a complete ClientHello body. Throws MalformedHello.
Fingerprint parse_client_hello_body(std::span<const std::uint8_t> body, const WireOptions& opts)
{
    std::size_t at = 0;
    auto need = [&](std::size_t n, const char* what) {
        if (at + n > body.size())
            throw MalformedHello(std::string("ClientHello truncated in ") + what);
    };

    need(2 + 32, "version/random");
    at += 2 + 32;
    need(1, "session id length");
    std::size_t sid = body[at++];
    if (sid > 32)
        throw MalformedHello("session id longer than 32 bytes");
    need(sid, "session id");
    at += sid;

    need(2, "cipher suite length");
    std::size_t cs_len = be16(body, at);
    at += 2;
    if (cs_len < 2 || cs_len % 2 != 0)
        throw MalformedHello("cipher suite vector length invalid");
    need(cs_len, "cipher suites");
    std::vector<Element> ciphers;
    ciphers.reserve(cs_len / 2);
    for (std::size_t i = 0; i < cs_len; i += 2)
        ciphers.push_back(Element{tls_code(be16(body, at + i), opts), std::nullopt});
    at += cs_len;

    need(1, "compression length");
    std::size_t comp = body[at++];
    if (comp < 1)
        throw MalformedHello("empty compression method list");
    need(comp, "compression methods");
    at += comp;

    std::vector<Element> extensions;
    if (at < body.size()) {
        need(2, "extensions length");
        std::size_t ext_len = be16(body, at);
        at += 2;
        if (at + ext_len != body.size())
            throw MalformedHello("extensions length disagrees with handshake length");
        while (at < body.size()) {
            need(4, "extension header");
            std::uint16_t type = be16(body, at);
            std::size_t len = be16(body, at + 2);
            at += 4;
            need(len, "extension data");
            Element e{tls_code(type, opts), std::nullopt};
            if (is_data_bearing(Protocol::tls, e.code))
                e.data = hex_lower(body.subspan(at, len));
            extensions.push_back(std::move(e));
            at += len;
        }
    }
    return Fingerprint::tls(std::move(ciphers), std::move(extensions));
}

bool is_tchar(unsigned char c)
{
    if (std::isalnum(c))
        return true;
    return std::string_view("!#$%&'*+-.^_`|~").find(static_cast<char>(c)) != std::string_view::npos;
}

bool iequals(std::string_view a, std::string_view b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    return true;
}

std::string_view trim_ows(std::string_view v)
{
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t'))
        v.remove_prefix(1);
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t'))
        v.remove_suffix(1);
    return v;
}

bool valid_request_line(std::string_view line)
{
    if (!line.empty() && line.back() == '\r')
        line.remove_suffix(1);
    std::size_t sp1 = line.find(' ');
    if (sp1 == 0 || sp1 == std::string_view::npos)
        return false;
    for (std::size_t i = 0; i < sp1; ++i)
        if (!is_tchar(static_cast<unsigned char>(line[i])))
            return false;
    std::size_t sp2 = line.find(' ', sp1 + 1);
    if (sp2 == std::string_view::npos || sp2 == sp1 + 1)
        return false;
    std::string_view version = line.substr(sp2 + 1);
    return version.size() == 8 && version.substr(0, 7) == "HTTP/1." && version[7] >= '0' && version[7] <= '9';
}

} // namespace

PacketView::PacketView(double timestamp, std::span<const std::uint8_t> bytes, LinkType link)
    : timestamp_(timestamp), bytes_(bytes), link_(link)
{
    std::size_t minimum = link == LinkType::ethernet ? ethernet_header : ipv4_min_header;
    if (bytes.size() < minimum)
        throw MalformedPacket("frame shorter than its link header (" + std::to_string(bytes.size()) + " bytes)");
}

IpAddress IpAddress::v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
{
    std::array<std::uint8_t, 4> raw{a, b, c, d};
    return from_v4(raw);
}

IpAddress IpAddress::from_v4(std::span<const std::uint8_t, 4> raw)
{
    IpAddress out;
    out.bytes[10] = 0xff;
    out.bytes[11] = 0xff;
    std::copy(raw.begin(), raw.end(), out.bytes.begin() + 12);
    return out;
}

IpAddress IpAddress::from_v6(std::span<const std::uint8_t, 16> raw)
{
    IpAddress out;
    std::copy(raw.begin(), raw.end(), out.bytes.begin());
    return out;
}

bool IpAddress::is_v4() const noexcept
{
    return std::all_of(bytes.begin(), bytes.begin() + 10, [](std::uint8_t b) { return b == 0; }) &&
           bytes[10] == 0xff && bytes[11] == 0xff;
}

std::string IpAddress::to_string() const
{
    char buf[64];
    if (is_v4()) {
        std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", bytes[12], bytes[13], bytes[14], bytes[15]);
        return buf;
    }
    std::string out;
    for (int i = 0; i < 16; i += 2) {
        if (i)
            out.push_back(':');
        std::snprintf(buf, sizeof buf, "%x", (bytes[i] << 8) | bytes[i + 1]);
        out += buf;
    }
    return out;
}

int normalize_ttl(int ttl) noexcept
{
    if (ttl <= 32)
        return 32;
    if (ttl <= 64)
        return 64;
    if (ttl <= 128)
        return 128;
    return 255;
}

std::optional<TcpSegment> decode_tcp(const PacketView& packet)
{
    auto bytes = packet.bytes();
    std::span<const std::uint8_t> ip = bytes;
    if (packet.link() == LinkType::ethernet) {
        std::size_t at = 12;
        std::uint16_t type = be16(bytes, at);
        while (type == ethertype_vlan || type == ethertype_qinq) {
            if (at + 6 > bytes.size())
                throw MalformedPacket("vlan tag truncated");
            at += 4;
            type = be16(bytes, at);
        }
        if (type != ethertype_ipv4 && type != ethertype_ipv6)
            return std::nullopt;
        ip = bytes.subspan(at + 2);
    }
    if (ip.empty())
        throw MalformedPacket("missing ip header");
    switch (ip[0] >> 4) {
    case 4:
        return decode_ipv4(ip);
    case 6:
        return decode_ipv6(ip);
    default:
        if (packet.link() == LinkType::raw_ip)
            throw MalformedPacket("unknown ip version");
        throw MalformedPacket("ip version disagrees with ethertype");
    }
}

std::vector<Element> decode_tcp_options(std::span<const std::uint8_t> opt)
{
    std::vector<Element> out;
    std::size_t i = 0;
    while (i < opt.size()) {
        std::uint8_t kind = opt[i];
        if (kind == 0) {
            out.push_back(Element{0, std::nullopt});
            break;
        }
        if (kind == 1) {
            out.push_back(Element{1, std::nullopt});
            ++i;
            continue;
        }
        if (i + 1 >= opt.size())
            throw MalformedPacket("tcp option length byte missing");
        std::size_t len = opt[i + 1];
        if (len < 2 || i + len > opt.size())
            throw MalformedPacket("tcp option overruns option list");
        Element e{kind, std::nullopt};
        if (kind == 2) {
            if (len != 4)
                throw MalformedPacket("tcp MSS option length must be 4");
            e.data = std::to_string(be16(opt, i + 2));
        } else if (kind == 3) {
            if (len != 3)
                throw MalformedPacket("tcp window scale option length must be 3");
            e.data = std::to_string(opt[i + 2]);
        }
        out.push_back(std::move(e));
        i += len;
    }
    return out;
}

std::optional<Fingerprint> parse_tcp_syn(const PacketView& packet, const WireOptions& opts)
{
    auto seg = decode_tcp(packet);
    if (!seg || !(seg->flags & tcp_flag::syn) || (seg->flags & tcp_flag::ack))
        return std::nullopt;
    int ttl = opts.normalize_ttl ? normalize_ttl(seg->ttl) : seg->ttl;
    return Fingerprint::tcp(ttl, decode_tcp_options(seg->options));
}

ScanResult scan_tls_client_hello(std::span<const std::uint8_t> bytes, const WireOptions& opts)
{
    if (bytes.empty())
        return {ScanStatus::need_more, std::nullopt};
    if (bytes[0] != tls_content_handshake)
        return {ScanStatus::absent, std::nullopt};

    // Gather handshake bytes across consecutive handshake records.
    std::vector<std::uint8_t> hs;
    std::size_t at = 0;
    bool first = true;
    while (at < bytes.size()) {
        if (bytes.size() - at < tls_record_header)
            break;
        if (bytes[at] != tls_content_handshake) {
            if (first)
                return {ScanStatus::absent, std::nullopt};
            break;
        }
        if (bytes[at + 1] != 3) {
            if (first)
                return {ScanStatus::absent, std::nullopt};
            throw MalformedHello("record version mismatch in continuation record");
        }
        std::size_t len = be16(bytes, at + 3);
        if (len == 0 || len > tls_max_record)
            throw MalformedHello("tls record length invalid");
        std::size_t avail = std::min(len, bytes.size() - at - tls_record_header);
        hs.insert(hs.end(), bytes.begin() + static_cast<std::ptrdiff_t>(at + tls_record_header),
                  bytes.begin() + static_cast<std::ptrdiff_t>(at + tls_record_header + avail));
        first = false;
        if (avail < len)
            break;
        at += tls_record_header + len;
        if (hs.size() >= 4 && hs.size() >= 4 + be24(hs, 1))
            break;
    }
    if (first) {
        // Only a partial record header is available.
        if (bytes.size() >= 2 && bytes[1] != 3)
            return {ScanStatus::absent, std::nullopt};
        return {ScanStatus::need_more, std::nullopt};
    }
    if (hs.empty())
        return {ScanStatus::need_more, std::nullopt};
    if (hs[0] != tls_handshake_client_hello)
        return {ScanStatus::absent, std::nullopt};
    if (hs.size() < 4)
        return {ScanStatus::need_more, std::nullopt};
    std::size_t body_len = be24(hs, 1);
    if (body_len > (1u << 16))
        throw MalformedHello("ClientHello length implausible");
    if (hs.size() < 4 + body_len)
        return {ScanStatus::need_more, std::nullopt};
    auto body = std::span<const std::uint8_t>(hs).subspan(4, body_len);
    return {ScanStatus::complete, parse_client_hello_body(body, opts)};
}

std::optional<Fingerprint> parse_tls_client_hello(std::span<const std::uint8_t> record_bytes, const WireOptions& opts)
{
    auto r = scan_tls_client_hello(record_bytes, opts);
    if (r.status == ScanStatus::need_more)
        throw MalformedHello("ClientHello truncated: record or handshake length exceeds available bytes");
    return r.fingerprint;
}

bool looks_like_http_request(std::span<const std::uint8_t> bytes) noexcept
{
    static constexpr std::array<std::string_view, 9> methods{"GET ",     "POST ",    "HEAD ",  "PUT ",  "DELETE ",
                                                             "OPTIONS ", "CONNECT ", "PATCH ", "TRACE "};
    std::string_view s(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    for (auto m : methods)
        if (s.size() >= m.size() ? s.substr(0, m.size()) == m : m.substr(0, s.size()) == s)
            return !s.empty();
    return false;
}

ScanResult scan_http_request(std::span<const std::uint8_t> bytes, const WireOptions& opts)
{
    std::size_t limit = std::min(bytes.size(), opts.http_scan_limit);
    std::string_view s(reinterpret_cast<const char*>(bytes.data()), limit);
    const bool can_grow = bytes.size() < opts.http_scan_limit;

    std::size_t eol = s.find('\n');
    if (eol == std::string_view::npos) {
        if (can_grow)
            return {ScanStatus::need_more, std::nullopt};
        throw MalformedRequest("no request line within scan limit");
    }
    if (!valid_request_line(s.substr(0, eol)))
        throw MalformedRequest("invalid HTTP/1.x request line");

    std::optional<std::string> user_agent;
    std::size_t at = eol + 1;
    while (true) {
        std::size_t next = s.find('\n', at);
        if (next == std::string_view::npos) {
            if (can_grow)
                return {ScanStatus::need_more, std::nullopt};
            throw MalformedRequest("no header terminator within scan limit");
        }
        std::string_view line = s.substr(at, next - at);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        at = next + 1;
        if (line.empty())
            break;
        std::size_t colon = line.find(':');
        if (colon == std::string_view::npos || user_agent)
            continue;
        if (iequals(line.substr(0, colon), "user-agent"))
            user_agent = std::string(trim_ows(line.substr(colon + 1)));
    }
    if (!user_agent)
        return {ScanStatus::absent, std::nullopt};
    return {ScanStatus::complete, Fingerprint::user_agent(std::move(*user_agent))};
}

std::optional<Fingerprint> parse_http_request(std::span<const std::uint8_t> stream_bytes, const WireOptions& opts)
{
    auto r = scan_http_request(stream_bytes, opts);
    if (r.status == ScanStatus::need_more)
        throw MalformedRequest("request incomplete: no header terminator");
    return r.fingerprint;
}

} // namespace osfp
