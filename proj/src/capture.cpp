#include "osfp/capture.hpp"

#include "osfp/error.hpp"

#include <array>
#include <cmath>
#include <cstring>

namespace osfp {

namespace {

constexpr std::uint32_t pcap_magic_us = 0xa1b2c3d4;
constexpr std::uint32_t pcap_magic_ns = 0xa1b23c4d;
constexpr std::uint32_t pcapng_shb = 0x0a0d0d0a;
constexpr std::uint32_t pcapng_byte_order = 0x1a2b3c4d;
constexpr std::uint32_t pcapng_idb = 1;
constexpr std::uint32_t pcapng_spb = 3;
constexpr std::uint32_t pcapng_epb = 6;

constexpr std::size_t max_frame = 256 * 1024;
constexpr std::size_t max_block = 16 * 1024 * 1024;

std::uint32_t bswap32(std::uint32_t v)
{
    return (v >> 24) | ((v >> 8) & 0xff00) | ((v << 8) & 0xff0000) | (v << 24);
}

std::uint32_t load_le32(const std::uint8_t* p)
{
    return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
           (std::uint32_t{p[3]} << 24);
}

} // namespace

double decimal_ticks_to_seconds(std::uint64_t units, int digits) noexcept
{
    if (digits > 18)
        return static_cast<double>(units) * std::pow(10.0, -digits);
    std::uint64_t p = 1;
    for (int i = 0; i < digits; ++i)
        p *= 10;
    if (units < (std::uint64_t{1} << 53))
        return static_cast<double>(units) / static_cast<double>(p);
    return static_cast<double>(units / p) + static_cast<double>(units % p) / static_cast<double>(p);
}

std::optional<LinkType> link_type_from_pcap(std::uint32_t linktype) noexcept
{
    switch (linktype) {
    case 1:
        return LinkType::ethernet;
    case 12:
    case 14:
    case 101:
    case 228:
    case 229:
        return LinkType::raw_ip;
    default:
        return std::nullopt;
    }
}

CaptureReader::CaptureReader(const std::filesystem::path& path) : in_(path, std::ios::binary)
{
    if (!in_)
        throw IoError("cannot open capture " + path.string());
    std::array<std::uint8_t, 4> magic{};
    if (!read_exact(magic.data(), magic.size())) {
        // Zero-length file: treat as an empty capture.
        done_ = true;
        truncated_ = in_.gcount() != 0;
        return;
    }
    std::uint32_t m = load_le32(magic.data());
    if (m == pcapng_shb) {
        pcapng_ = true;
        if (!read_section_header(m))
            done_ = true;
        return;
    }
    if (m == pcap_magic_us || m == pcap_magic_ns) {
        swapped_ = false;
    } else if (bswap32(m) == pcap_magic_us || bswap32(m) == pcap_magic_ns) {
        swapped_ = true;
        m = bswap32(m);
    } else {
        throw CaptureError("not a pcap or pcapng file: " + path.string());
    }
    resolution_ = Resolution{false, m == pcap_magic_ns ? 9 : 6};
    std::array<std::uint8_t, 20> rest{};
    if (!read_exact(rest.data(), rest.size())) {
        done_ = true;
        truncated_ = true;
        return;
    }
    link_ = link_type_from_pcap(u32(rest.data() + 16) & 0x0fffffff);
}

bool CaptureReader::read_exact(void* dst, std::size_t n)
{
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in_.gcount()) == n;
}

std::uint32_t CaptureReader::u32(const std::uint8_t* p) const noexcept
{
    std::uint32_t v = load_le32(p);
    return swapped_ ? bswap32(v) : v;
}

std::uint16_t CaptureReader::u16(const std::uint8_t* p) const noexcept
{
    std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    return swapped_ ? static_cast<std::uint16_t>((v >> 8) | (v << 8)) : v;
}

std::optional<CapturedPacket> CaptureReader::next()
{
    while (!done_) {
        auto pkt = pcapng_ ? next_pcapng() : next_pcap();
        if (pkt)
            return pkt;
    }
    return std::nullopt;
}

std::optional<CapturedPacket> CaptureReader::next_pcap()
{
    std::array<std::uint8_t, 16> hdr{};
    if (!read_exact(hdr.data(), hdr.size())) {
        truncated_ = in_.gcount() != 0;
        done_ = true;
        return std::nullopt;
    }
    std::uint32_t sec = u32(hdr.data());
    std::uint32_t frac = u32(hdr.data() + 4);
    std::uint32_t incl = u32(hdr.data() + 8);
    if (incl > max_frame) {
        truncated_ = true;
        done_ = true;
        return std::nullopt;
    }
    CapturedPacket pkt;
    pkt.bytes.resize(incl);
    if (!read_exact(pkt.bytes.data(), incl)) {
        truncated_ = true;
        done_ = true;
        return std::nullopt;
    }
    if (!link_) {
        ++unsupported_link_;
        return std::nullopt;
    }
    pkt.link = *link_;
    std::uint64_t scale = resolution_.exponent == 9 ? 1000000000u : 1000000u;
    pkt.timestamp = decimal_ticks_to_seconds(std::uint64_t{sec} * scale + frac, resolution_.exponent);
    return pkt;
}

bool CaptureReader::read_section_header(std::uint32_t)
{
    std::array<std::uint8_t, 8> head{};
    if (!read_exact(head.data(), head.size())) {
        truncated_ = true;
        return false;
    }
    std::uint32_t bom = load_le32(head.data() + 4);
    if (bom == pcapng_byte_order)
        swapped_ = false;
    else if (bswap32(bom) == pcapng_byte_order)
        swapped_ = true;
    else
        throw CaptureError("pcapng section header has bad byte-order magic");
    std::uint32_t total = u32(head.data());
    if (total < 28 || total % 4 != 0 || total > max_block)
        throw CaptureError("pcapng section header length invalid");
    std::vector<std::uint8_t> rest(total - 12);
    if (!read_exact(rest.data(), rest.size())) {
        truncated_ = true;
        return false;
    }
    interfaces_.clear();
    return true;
}

std::optional<CapturedPacket> CaptureReader::next_pcapng()
{
    std::array<std::uint8_t, 8> head{};
    if (!read_exact(head.data(), head.size())) {
        truncated_ = in_.gcount() != 0;
        done_ = true;
        return std::nullopt;
    }
    std::uint32_t type = load_le32(head.data());
    if (type == pcapng_shb) {
        in_.seekg(-4, std::ios::cur);
        if (!read_section_header(type))
            done_ = true;
        return std::nullopt;
    }
    type = u32(head.data());
    std::uint32_t total = u32(head.data() + 4);
    if (total < 12 || total % 4 != 0 || total > max_block) {
        truncated_ = true;
        done_ = true;
        return std::nullopt;
    }
    std::vector<std::uint8_t> body(total - 8);
    if (!read_exact(body.data(), body.size())) {
        truncated_ = true;
        done_ = true;
        return std::nullopt;
    }
    const std::size_t body_len = body.size() - 4;  // trailing length copy

    if (type == pcapng_idb) {
        if (body_len < 8) {
            truncated_ = true;
            done_ = true;
            return std::nullopt;
        }
        Interface iface;
        iface.link = link_type_from_pcap(u16(body.data()));
        std::size_t at = 8;
        while (at + 4 <= body_len) {
            std::uint16_t code = u16(body.data() + at);
            std::uint16_t len = u16(body.data() + at + 2);
            at += 4;
            if (code == 0 || at + len > body_len)
                break;
            if (code == 9 && len >= 1) {
                std::uint8_t res = body[at];
                iface.resolution = Resolution{(res & 0x80) != 0, res & 0x7f};
            }
            at += (len + 3u) & ~3u;
        }
        interfaces_.push_back(iface);
        return std::nullopt;
    }

    if (type == pcapng_epb) {
        if (body_len < 20) {
            truncated_ = true;
            done_ = true;
            return std::nullopt;
        }
        std::uint32_t iface = u32(body.data());
        std::uint64_t ts = (std::uint64_t{u32(body.data() + 4)} << 32) | u32(body.data() + 8);
        std::uint32_t cap = u32(body.data() + 12);
        if (cap > body_len - 20 || cap > max_frame) {
            truncated_ = true;
            done_ = true;
            return std::nullopt;
        }
        if (iface >= interfaces_.size() || !interfaces_[iface].link) {
            ++unsupported_link_;
            return std::nullopt;
        }
        CapturedPacket pkt;
        pkt.link = *interfaces_[iface].link;
        const auto& r = interfaces_[iface].resolution;
        pkt.timestamp = r.binary ? std::ldexp(static_cast<double>(ts), -r.exponent)
                                 : decimal_ticks_to_seconds(ts, r.exponent);
        pkt.bytes.assign(body.begin() + 20, body.begin() + 20 + cap);
        return pkt;
    }

    if (type == pcapng_spb) {
        if (body_len < 4 || interfaces_.empty() || !interfaces_[0].link) {
            ++unsupported_link_;
            return std::nullopt;
        }
        std::uint32_t orig = u32(body.data());
        std::size_t cap = std::min<std::size_t>(orig, body_len - 4);
        CapturedPacket pkt;
        pkt.link = *interfaces_[0].link;
        pkt.timestamp = 0.0;  // simple packet blocks carry no timestamp
        pkt.bytes.assign(body.begin() + 4, body.begin() + 4 + static_cast<std::ptrdiff_t>(cap));
        return pkt;
    }
    return std::nullopt;
}

} // namespace osfp
