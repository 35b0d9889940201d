#pragma once

#include "osfp/wire.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace osfp {

/// Secret key for address pseudonymization (at least 16 bytes).
class PseudonymKey {
public:
    static constexpr std::size_t min_length = 16;

    /// Throws KeyTooShort.
    explicit PseudonymKey(std::span<const std::uint8_t> material);

    /// Reads raw key material from a file; trailing newlines are ignored.
    static PseudonymKey from_file(const std::filesystem::path& path);
    /// Reads key material from the named environment variable.
    static PseudonymKey from_env(const std::string& variable);

    const std::array<std::uint8_t, 16>& cipher_key() const noexcept { return cipher_key_; }

private:
    std::array<std::uint8_t, 16> cipher_key_{};
};

/// Deterministic encryption of the 16-byte (IPv4-mapped) address under
/// AES-128, rendered as 32 lowercase hex digits. A block cipher is a
/// permutation, so the mapping is injective for a fixed key.
std::string pseudonymize_address(const IpAddress& addr, const PseudonymKey& key);

} // namespace osfp
