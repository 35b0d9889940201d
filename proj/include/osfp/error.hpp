#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace osfp {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// wire_extract
class MalformedPacket : public Error { using Error::Error; };
class MalformedHello : public Error { using Error::Error; };
class MalformedRequest : public Error { using Error::Error; };
class KeyTooShort : public Error { using Error::Error; };
class CaptureError : public Error { using Error::Error; };

// fingerprint_core
class InvalidFingerprint : public Error { using Error::Error; };

class GrammarError : public Error {
public:
    GrammarError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class InconsistentStore : public Error { using Error::Error; };

// infogain / single_session
class EmptyStore : public Error { using Error::Error; };
class NoTrainingData : public Error { using Error::Error; };
class ProtocolMismatch : public Error { using Error::Error; };

// multi_session
class EmptyTraining : public Error { using Error::Error; };
class InsufficientClasses : public Error { using Error::Error; };

class UnmappedLabel : public Error {
public:
    explicit UnmappedLabel(const std::string& label)
        : Error("label not covered by taxonomy: " + label), label_(label) {}
    const std::string& label() const noexcept { return label_; }

private:
    std::string label_;
};

// forest
class ShapeMismatch : public Error { using Error::Error; };
class SingleClass : public Error { using Error::Error; };
class TooFewRows : public Error { using Error::Error; };
class ModelMismatch : public Error { using Error::Error; };

// obfuscation_sim
class MissingFamily : public Error { using Error::Error; };
class EmptySamplerSupport : public Error { using Error::Error; };

// synth_corpus / cli
class InvalidSpec : public Error { using Error::Error; };
class UnlabeledData : public Error { using Error::Error; };

/// Configuration problem; `field` is a JSON-pointer style path into the document.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : Error(field.empty() ? what : field + ": " + what), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class IoError : public Error { using Error::Error; };

} // namespace osfp
