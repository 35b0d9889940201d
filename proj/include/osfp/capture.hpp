#pragma once

#include "osfp/wire.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

namespace osfp {

/// A frame read from a capture file; owns its bytes.
struct CapturedPacket {
    double timestamp = 0.0;
    LinkType link = LinkType::ethernet;
    std::vector<std::uint8_t> bytes;

    /// Throws MalformedPacket if the frame is shorter than its link header.
    PacketView view() const { return PacketView(timestamp, bytes, link); }
};

/// Sequential reader for classic pcap (micro- and nanosecond variants,
/// either byte order) and pcapng (SHB, IDB, EPB, SPB; other blocks skipped).
///
/// A file that ends mid-record sets `truncated()` and stops; it is not an
/// error. An unrecognized header throws CaptureError.
class CaptureReader {
public:
    explicit CaptureReader(const std::filesystem::path& path);

    std::optional<CapturedPacket> next();

    bool truncated() const noexcept { return truncated_; }
    /// Frames skipped because their link type is unsupported.
    std::uint64_t unsupported_link() const noexcept { return unsupported_link_; }

private:
    /// Timestamp units: 10^-exponent seconds, or 2^-exponent if binary.
    struct Resolution {
        bool binary = false;
        int exponent = 6;
    };
    struct Interface {
        std::optional<LinkType> link;
        Resolution resolution;
    };

    bool read_exact(void* dst, std::size_t n);
    std::optional<CapturedPacket> next_pcap();
    std::optional<CapturedPacket> next_pcapng();
    bool read_section_header(std::uint32_t block_type_le);

    std::uint32_t u32(const std::uint8_t* p) const noexcept;
    std::uint16_t u16(const std::uint8_t* p) const noexcept;

    std::ifstream in_;
    bool pcapng_ = false;
    bool swapped_ = false;
    bool done_ = false;
    bool truncated_ = false;
    Resolution resolution_;
    std::optional<LinkType> link_;
    std::vector<Interface> interfaces_;
    std::uint64_t unsupported_link_ = 0;
};

/// Seconds for a count of 10^-digits second units, correctly rounded
/// whenever the count fits a double's mantissa.
double decimal_ticks_to_seconds(std::uint64_t units, int digits) noexcept;

/// Maps a pcap LINKTYPE value to a supported link type.
std::optional<LinkType> link_type_from_pcap(std::uint32_t linktype) noexcept;

} // namespace osfp
