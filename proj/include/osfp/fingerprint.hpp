#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace osfp {

enum class Protocol : std::uint8_t { tcp = 0, tls = 1, http = 2 };

inline constexpr std::array<Protocol, 3> all_protocols{Protocol::tcp, Protocol::tls, Protocol::http};

std::string_view to_string(Protocol p) noexcept;

/// Parses "tcp", "tls" or "http"; throws osfp::Error otherwise.
Protocol protocol_from_string(std::string_view s);

/// One entry of a fingerprint: a protocol type code, optionally paired with
/// the string value carried by that code on the wire.
struct Element {
    std::uint32_t code = 0;
    std::optional<std::string> data;

    friend bool operator==(const Element&, const Element&) = default;
};

/// True for the codes that carry a value: TCP MSS/WS (2, 3), TLS
/// supported_groups/ec_point_formats/ALPN (10, 11, 16), HTTP User-Agent (0).
/// For TLS this applies to the extension segment only.
bool is_data_bearing(Protocol p, std::uint32_t code) noexcept;

/// Immutable fingerprint value. Copies share one body, so passing
/// fingerprints around by value is cheap.
///
/// TCP fingerprints carry the (normalized) TTL separately from the option
/// list. TLS fingerprints hold the cipher suites followed by the extensions;
/// `segment_boundary()` is the index where extensions begin.
class Fingerprint {
public:
    static Fingerprint tcp(int ttl, std::vector<Element> options);
    static Fingerprint tls(std::vector<Element> ciphers, std::vector<Element> extensions);
    static Fingerprint http(std::vector<Element> elements);
    static Fingerprint user_agent(std::string value);

    Protocol protocol() const noexcept { return body_->protocol; }
    std::span<const Element> elements() const noexcept { return body_->elements; }
    std::size_t segment_boundary() const noexcept { return body_->boundary; }
    std::span<const Element> ciphers() const noexcept;
    std::span<const Element> extensions() const noexcept;
    /// TTL for tcp fingerprints; 0 for other protocols.
    int ttl() const noexcept { return body_->ttl; }

    /// Canonical text form, see canonicalize().
    const std::string& canonical() const noexcept { return body_->canonical; }

    friend bool operator==(const Fingerprint& a, const Fingerprint& b) noexcept;
    friend std::strong_ordering operator<=>(const Fingerprint& a, const Fingerprint& b) noexcept
    {
        return a.canonical() <=> b.canonical();
    }

private:
    struct Body {
        Protocol protocol;
        int ttl;
        std::size_t boundary;
        std::vector<Element> elements;
        std::string canonical;
    };

    explicit Fingerprint(std::shared_ptr<const Body> body) : body_(std::move(body)) {}
    static Fingerprint make(Protocol p, int ttl, std::size_t boundary, std::vector<Element> elements);

    std::shared_ptr<const Body> body_;
};

/// Canonical string:
///   tcp/<ttl>:(code[=data])...
///   tls/(cipher)...|(ext[=data])...
///   http/(0=<user agent>)
/// Inside data, '\', '(' and ')' are escaped with a backslash.
std::string canonicalize(const Fingerprint& fp);

/// Inverse of canonicalize. Throws GrammarError with the byte offset of the
/// first violation.
Fingerprint parse_canonical(std::string_view s);

/// Parses one fingerprint starting at `pos` and advances `pos` past it.
Fingerprint parse_canonical_prefix(std::string_view s, std::size_t& pos);

/// Composite keys join canonical fingerprints with '+', e.g. the set of
/// fingerprints a host showed in one window.
std::string composite_key(std::span<const std::string> canonical_parts);
std::vector<Fingerprint> parse_composite_key(std::string_view s);

/// An operating-system (or grouped) category name.
class CategoryLabel {
public:
    explicit CategoryLabel(std::string name);

    const std::string& str() const noexcept { return name_; }

    friend bool operator==(const CategoryLabel&, const CategoryLabel&) = default;
    friend std::strong_ordering operator<=>(const CategoryLabel& a, const CategoryLabel& b) noexcept
    {
        return a.name_ <=> b.name_;
    }

private:
    std::string name_;
};

} // namespace osfp
