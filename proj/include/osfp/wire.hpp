#pragma once

#include "osfp/fingerprint.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace osfp {

enum class LinkType : std::uint8_t { ethernet, raw_ip };

/// A captured frame. The bytes are borrowed; the view must not outlive them.
class PacketView {
public:
    /// Throws MalformedPacket if `bytes` is shorter than the link type's
    /// minimum header (14 for ethernet, 20 for raw IP).
    PacketView(double timestamp, std::span<const std::uint8_t> bytes, LinkType link);

    double timestamp() const noexcept { return timestamp_; }
    std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }
    LinkType link() const noexcept { return link_; }

private:
    double timestamp_;
    std::span<const std::uint8_t> bytes_;
    LinkType link_;
};

/// IPv4 addresses are stored IPv4-mapped (::ffff:a.b.c.d).
struct IpAddress {
    std::array<std::uint8_t, 16> bytes{};

    static IpAddress v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d);
    static IpAddress from_v4(std::span<const std::uint8_t, 4> raw);
    static IpAddress from_v6(std::span<const std::uint8_t, 16> raw);

    bool is_v4() const noexcept;
    std::string to_string() const;

    friend auto operator<=>(const IpAddress&, const IpAddress&) = default;
};

namespace tcp_flag {
inline constexpr std::uint8_t fin = 0x01;
inline constexpr std::uint8_t syn = 0x02;
inline constexpr std::uint8_t rst = 0x04;
inline constexpr std::uint8_t psh = 0x08;
inline constexpr std::uint8_t ack = 0x10;
} // namespace tcp_flag

/// The TCP-relevant view of one packet. Spans borrow from the PacketView.
struct TcpSegment {
    IpAddress src;
    IpAddress dst;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint32_t seq = 0;
    std::uint8_t flags = 0;
    std::uint8_t ttl = 0;
    std::span<const std::uint8_t> options;
    std::span<const std::uint8_t> payload;
};

struct WireOptions {
    bool normalize_ttl = true;
    bool normalize_grease = true;
    /// Bytes scanned for an HTTP request line plus headers.
    std::size_t http_scan_limit = 8192;
};

/// Sentinel code that replaces every GREASE value.
inline constexpr std::uint32_t grease_sentinel = 2570;

constexpr bool is_grease(std::uint16_t v) noexcept
{
    return (v & 0x0f0f) == 0x0a0a && (v >> 8) == (v & 0xff);
}

/// Rounds a TTL up to the nearest of {32, 64, 128, 255}.
int normalize_ttl(int ttl) noexcept;

/// Decodes the link, IP and TCP headers. Returns nothing for non-IP frames,
/// non-TCP packets and non-initial fragments. Throws MalformedPacket when
/// header lengths disagree with the byte count.
std::optional<TcpSegment> decode_tcp(const PacketView& packet);

/// Decodes a TCP option list. Throws MalformedPacket on overruns or bad
/// MSS/WS lengths.
std::vector<Element> decode_tcp_options(std::span<const std::uint8_t> options);

/// Fingerprint of a client SYN (SYN set, ACK clear); nothing otherwise.
std::optional<Fingerprint> parse_tcp_syn(const PacketView& packet, const WireOptions& opts = {});

/// Fingerprint of a TLS record carrying a ClientHello; nothing for any
/// other record. Throws MalformedHello on inconsistent or truncated lengths.
std::optional<Fingerprint> parse_tls_client_hello(std::span<const std::uint8_t> record_bytes,
                                                  const WireOptions& opts = {});

/// User-Agent fingerprint of an HTTP/1.x request; nothing if the request
/// has no User-Agent header. Throws MalformedRequest when there is no
/// request line or no header terminator within the scan limit.
std::optional<Fingerprint> parse_http_request(std::span<const std::uint8_t> stream_bytes,
                                              const WireOptions& opts = {});

/// Incremental variants used by session assembly: `need_more` means the
/// bytes seen so far are a consistent prefix of a message.
enum class ScanStatus { complete, absent, need_more };

struct ScanResult {
    ScanStatus status = ScanStatus::absent;
    std::optional<Fingerprint> fingerprint;
};

ScanResult scan_tls_client_hello(std::span<const std::uint8_t> bytes, const WireOptions& opts = {});
ScanResult scan_http_request(std::span<const std::uint8_t> bytes, const WireOptions& opts = {});

/// True if `bytes` plausibly starts an HTTP/1.x request (known method + SP).
bool looks_like_http_request(std::span<const std::uint8_t> bytes) noexcept;

} // namespace osfp
