#include "osfp/single_session.hpp"

#include "osfp/error.hpp"

#include <set>

namespace osfp {

Fallback fallback_from_string(std::string_view s)
{
    if (s == "abstain")
        return Fallback::abstain;
    if (s == "prior-argmax")
        return Fallback::prior_argmax;
    throw Error("unknown fallback: " + std::string(s));
}

std::string to_string(Fallback f)
{
    return f == Fallback::abstain ? "abstain" : "prior-argmax";
}

namespace {

std::optional<CategoryLabel> argmax(const CountStore::LabelCounts& counts)
{
    std::optional<CategoryLabel> best;
    std::uint64_t best_n = 0;
    for (const auto& [label, n] : counts) {
        if (n > best_n) {
            best = label;
            best_n = n;
        }
    }
    return best;
}

} // namespace

SingleSessionModel::SingleSessionModel(Protocol protocol, CountStore store, Fallback fallback)
    : protocol_(protocol), store_(std::move(store)), fallback_(fallback)
{
    majority_ = argmax(store_.label_totals());
    for (const auto& [key, counts] : store_.rows())
        if (auto best = argmax(counts))
            decisions_.emplace(key, *best);
}

std::optional<CategoryLabel> SingleSessionModel::classify(const Fingerprint& fp) const
{
    if (fp.protocol() != protocol_)
        throw ProtocolMismatch("model is for " + std::string(to_string(protocol_)) + ", fingerprint is " +
                               std::string(to_string(fp.protocol())));
    auto it = decisions_.find(fp.canonical());
    if (it != decisions_.end())
        return it->second;
    if (fallback_ == Fallback::prior_argmax)
        return majority_;
    return std::nullopt;
}

nlohmann::ordered_json SingleSessionModel::to_json() const
{
    nlohmann::ordered_json j;
    j["protocol"] = std::string(to_string(protocol_));
    j["fallback"] = to_string(fallback_);
    j["tie_break"] = "lexicographic";
    j["counts"] = store_.to_json()["counts"];
    return j;
}

SingleSessionModel SingleSessionModel::from_json(const nlohmann::json& j)
{
    try {
        Protocol p = protocol_from_string(j.at("protocol").get<std::string>());
        Fallback f = fallback_from_string(j.at("fallback").get<std::string>());
        if (j.value("tie_break", "lexicographic") != "lexicographic")
            throw Error("unsupported tie-break");
        CountStore store = CountStore::from_json(j);
        for (const auto& [key, counts] : store.rows())
            if (parse_canonical(key).protocol() != p)
                throw ProtocolMismatch("model entry of another protocol: " + key);
        return SingleSessionModel(p, std::move(store), f);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("bad model JSON: ") + e.what());
    }
}

SingleSessionModel train_single(std::span<const SessionRecord> sessions, Protocol protocol, Fallback fallback)
{
    CountStore store;
    for (const auto& s : sessions) {
        const auto& fp = s.fingerprint(protocol);
        if (fp && s.label)
            store.observe(*fp, *s.label);
    }
    if (store.empty())
        throw NoTrainingData("no labeled " + std::string(to_string(protocol)) + " sessions to train on");
    return SingleSessionModel(protocol, std::move(store), fallback);
}

SingleEvaluation evaluate_single(const SingleSessionModel& model, std::span<const SessionRecord> test)
{
    std::set<CategoryLabel> labels;
    for (const auto& [label, n] : model.store().label_totals())
        labels.insert(label);
    for (const auto& s : test)
        if (s.label && s.fingerprint(model.protocol()))
            labels.insert(*s.label);

    SingleEvaluation ev{ConfusionMatrix({labels.begin(), labels.end()})};
    for (const auto& s : test) {
        if (!s.label)
            continue;
        const auto& fp = s.fingerprint(model.protocol());
        if (!fp) {
            ++ev.skipped;
            continue;
        }
        auto predicted = model.classify(*fp);
        if (!predicted) {
            ++ev.abstained;
            continue;
        }
        ev.matrix.add(*s.label, *predicted);
    }
    return ev;
}

} // namespace osfp
