#pragma once

#include "osfp/fingerprint.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace osfp {

/// Rows are true labels, columns predicted labels, both in label order.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    /// Labels are sorted and deduplicated.
    explicit ConfusionMatrix(std::vector<CategoryLabel> labels);

    /// Throws Error for labels outside the declared set.
    void add(const CategoryLabel& truth, const CategoryLabel& predicted, std::uint64_t n = 1);

    const std::vector<CategoryLabel>& labels() const noexcept { return labels_; }
    std::uint64_t cell(std::size_t truth, std::size_t predicted) const { return cells_[truth * labels_.size() + predicted]; }
    std::uint64_t cell(const CategoryLabel& truth, const CategoryLabel& predicted) const;
    std::uint64_t total() const noexcept { return total_; }
    std::uint64_t correct() const;
    /// 0 for an empty matrix.
    double accuracy() const;
    /// Nothing when the label has no test rows.
    std::optional<double> recall(const CategoryLabel& label) const;

    std::string to_csv() const;
    nlohmann::ordered_json to_json() const;

private:
    std::size_t index(const CategoryLabel& label) const;

    std::vector<CategoryLabel> labels_;
    std::vector<std::uint64_t> cells_;
    std::uint64_t total_ = 0;
};

} // namespace osfp
