#pragma once

#include "osfp/fingerprint.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace osfp {

struct SessionKey {
    std::string src_id;
    std::string dst_id;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;

    friend auto operator<=>(const SessionKey&, const SessionKey&) = default;
};

/// One observed client-initiated TCP connection.
struct SessionRecord {
    SessionKey key;
    double start_time = 0.0;
    std::optional<Fingerprint> tcp_fp;
    std::optional<Fingerprint> tls_fp;
    std::optional<Fingerprint> http_fp;
    std::optional<CategoryLabel> label;

    const std::optional<Fingerprint>& fingerprint(Protocol p) const noexcept;
    std::optional<Fingerprint>& fingerprint(Protocol p) noexcept;

    /// Throws osfp::Error if no fingerprint is present, a fingerprint sits
    /// in the wrong field, or a pseudonym is empty.
    void validate() const;
};

/// One JSON Lines object: ts, src, dst, sp, dp, tcp {ttl, opts},
/// tls {elems, ciphers}, http {ua}, label. Absent protocols are omitted.
nlohmann::ordered_json to_json(const SessionRecord& r);
SessionRecord session_from_json(const nlohmann::json& j);

void write_jsonl(std::ostream& out, const SessionRecord& r);

/// Reads a whole JSON Lines corpus; blank lines are skipped. Errors name the
/// offending line.
std::vector<SessionRecord> read_jsonl(std::istream& in);
std::vector<SessionRecord> read_jsonl_file(const std::filesystem::path& path);

} // namespace osfp
