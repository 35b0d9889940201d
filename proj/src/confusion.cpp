#include "osfp/confusion.hpp"

#include "osfp/error.hpp"

#include <algorithm>

namespace osfp {

ConfusionMatrix::ConfusionMatrix(std::vector<CategoryLabel> labels) : labels_(std::move(labels))
{
    std::sort(labels_.begin(), labels_.end());
    labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
    cells_.assign(labels_.size() * labels_.size(), 0);
}

std::size_t ConfusionMatrix::index(const CategoryLabel& label) const
{
    auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
    if (it == labels_.end() || *it != label)
        throw Error("label not in confusion matrix: " + label.str());
    return static_cast<std::size_t>(it - labels_.begin());
}

void ConfusionMatrix::add(const CategoryLabel& truth, const CategoryLabel& predicted, std::uint64_t n)
{
    cells_[index(truth) * labels_.size() + index(predicted)] += n;
    total_ += n;
}

std::uint64_t ConfusionMatrix::cell(const CategoryLabel& truth, const CategoryLabel& predicted) const
{
    return cell(index(truth), index(predicted));
}

std::uint64_t ConfusionMatrix::correct() const
{
    std::uint64_t c = 0;
    for (std::size_t i = 0; i < labels_.size(); ++i)
        c += cell(i, i);
    return c;
}

double ConfusionMatrix::accuracy() const
{
    return total_ == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(total_);
}

std::optional<double> ConfusionMatrix::recall(const CategoryLabel& label) const
{
    std::size_t t = index(label);
    std::uint64_t row = 0;
    for (std::size_t p = 0; p < labels_.size(); ++p)
        row += cell(t, p);
    if (row == 0)
        return std::nullopt;
    return static_cast<double>(cell(t, t)) / static_cast<double>(row);
}

namespace {

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n\r") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + '"';
}

} // namespace

std::string ConfusionMatrix::to_csv() const
{
    std::string out = "true\\predicted";
    for (const auto& l : labels_)
        out += "," + csv_field(l.str());
    out += "\n";
    for (std::size_t t = 0; t < labels_.size(); ++t) {
        out += csv_field(labels_[t].str());
        for (std::size_t p = 0; p < labels_.size(); ++p)
            out += "," + std::to_string(cell(t, p));
        out += "\n";
    }
    return out;
}

nlohmann::ordered_json ConfusionMatrix::to_json() const
{
    nlohmann::ordered_json labels = nlohmann::ordered_json::array();
    for (const auto& l : labels_)
        labels.push_back(l.str());
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    nlohmann::ordered_json recall_json = nlohmann::ordered_json::object();
    for (std::size_t t = 0; t < labels_.size(); ++t) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (std::size_t p = 0; p < labels_.size(); ++p)
            row.push_back(cell(t, p));
        rows.push_back(std::move(row));
        auto r = recall(labels_[t]);
        recall_json[labels_[t].str()] = r ? nlohmann::ordered_json(*r) : nlohmann::ordered_json(nullptr);
    }
    return {{"labels", std::move(labels)},
            {"cells", std::move(rows)},
            {"total", total_},
            {"accuracy", accuracy()},
            {"recall", std::move(recall_json)}};
}

} // namespace osfp
