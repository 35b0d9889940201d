#pragma once

#include "osfp/confusion.hpp"
#include "osfp/count_store.hpp"
#include "osfp/session.hpp"

#include <optional>
#include <span>
#include <string>
#include <unordered_map>

#include <json.hpp>

namespace osfp {

enum class Fallback { abstain, prior_argmax };

Fallback fallback_from_string(std::string_view s);
std::string to_string(Fallback f);

/// Per-flow argmax classifier over the empirical posterior of one protocol.
/// Ties go to the lexicographically smallest label.
class SingleSessionModel {
public:
    SingleSessionModel(Protocol protocol, CountStore store, Fallback fallback = Fallback::abstain);

    Protocol protocol() const noexcept { return protocol_; }
    Fallback fallback() const noexcept { return fallback_; }
    const CountStore& store() const noexcept { return store_; }

    /// Throws ProtocolMismatch for a fingerprint of another protocol.
    std::optional<CategoryLabel> classify(const Fingerprint& fp) const;

    nlohmann::ordered_json to_json() const;
    static SingleSessionModel from_json(const nlohmann::json& j);

private:
    Protocol protocol_;
    CountStore store_;
    Fallback fallback_;
    std::optional<CategoryLabel> majority_;
    std::unordered_map<std::string, CategoryLabel> decisions_;
};

/// Throws NoTrainingData if no labeled session carries the protocol.
SingleSessionModel train_single(std::span<const SessionRecord> sessions, Protocol protocol,
                                Fallback fallback = Fallback::abstain);

struct SingleEvaluation {
    ConfusionMatrix matrix;
    /// Flows left unclassified under the abstain fallback.
    std::uint64_t abstained = 0;
    /// Labeled flows lacking the protocol's fingerprint; not evaluated.
    std::uint64_t skipped = 0;
};

SingleEvaluation evaluate_single(const SingleSessionModel& model, std::span<const SessionRecord> test);

} // namespace osfp
