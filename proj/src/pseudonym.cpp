#include "osfp/pseudonym.hpp"

#include "osfp/error.hpp"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <memory>
#include <vector>

#include <openssl/evp.h>
#include <openssl/sha.h>

namespace osfp {

PseudonymKey::PseudonymKey(std::span<const std::uint8_t> material)
{
    if (material.size() < min_length)
        throw KeyTooShort("pseudonym key must be at least " + std::to_string(min_length) + " bytes, got " +
                          std::to_string(material.size()));
    // Key material of any length >= 16 is condensed to an AES-128 key.
    std::array<std::uint8_t, SHA256_DIGEST_LENGTH> digest{};
    SHA256(material.data(), material.size(), digest.data());
    std::copy_n(digest.begin(), cipher_key_.size(), cipher_key_.begin());
}

PseudonymKey PseudonymKey::from_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read key file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    while (!bytes.empty() && (bytes.back() == '\n' || bytes.back() == '\r'))
        bytes.pop_back();
    return PseudonymKey(bytes);
}

PseudonymKey PseudonymKey::from_env(const std::string& variable)
{
    const char* value = std::getenv(variable.c_str());
    if (!value)
        throw IoError("environment variable " + variable + " is not set");
    std::string s(value);
    return PseudonymKey(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

std::string pseudonymize_address(const IpAddress& addr, const PseudonymKey& key)
{
    std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(EVP_CIPHER_CTX_new(), &EVP_CIPHER_CTX_free);
    if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ecb(), nullptr, key.cipher_key().data(), nullptr) != 1)
        throw Error("AES initialization failed");
    EVP_CIPHER_CTX_set_padding(ctx.get(), 0);
    std::array<std::uint8_t, 32> out{};
    int len = 0;
    if (EVP_EncryptUpdate(ctx.get(), out.data(), &len, addr.bytes.data(), static_cast<int>(addr.bytes.size())) != 1 ||
        len != 16)
        throw Error("AES encryption failed");

    static constexpr char digits[] = "0123456789abcdef";
    std::string hex;
    hex.reserve(32);
    for (int i = 0; i < 16; ++i) {
        hex.push_back(digits[out[i] >> 4]);
        hex.push_back(digits[out[i] & 0x0f]);
    }
    return hex;
}

} // namespace osfp
