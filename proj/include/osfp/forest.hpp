#pragma once

#include "osfp/fingerprint.hpp"
#include "osfp/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace osfp {

/// Row-major sparse binary matrix: each row lists its set columns ascending.
class BinaryMatrix {
public:
    explicit BinaryMatrix(std::size_t cols = 0) : cols_(cols) { offsets_.push_back(0); }

    /// `set_columns` need not be sorted; duplicates are ignored.
    void add_row(std::span<const std::uint32_t> set_columns);
    void add_dense_row(std::span<const std::uint8_t> bits);

    std::size_t rows() const noexcept { return offsets_.size() - 1; }
    std::size_t cols() const noexcept { return cols_; }
    std::span<const std::uint32_t> row(std::size_t r) const
    {
        return {columns_.data() + offsets_[r], offsets_[r + 1] - offsets_[r]};
    }
    bool get(std::size_t r, std::size_t c) const;

    /// Rows listed in `rows`, in that order (repeats allowed).
    BinaryMatrix select_rows(std::span<const std::uint32_t> rows) const;
    /// Column j of the result is column perm[j] of this matrix.
    BinaryMatrix permute_columns(std::span<const std::uint32_t> perm) const;

private:
    std::size_t cols_;
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> columns_;
};

struct TreeParams {
    /// Nothing means unlimited depth.
    std::optional<int> max_depth;
    std::size_t features_per_split = 1;
};

struct TreeNode {
    /// -1 for leaves.
    std::int32_t feature = -1;
    std::uint32_t zero_child = 0;
    std::uint32_t one_child = 0;
    /// Per-label training counts; leaves only.
    std::vector<std::uint64_t> counts;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Nodes in preorder; node 0 is the root.
struct DecisionTree {
    std::vector<TreeNode> nodes;

    /// Index of the leaf's majority label (ties to the smallest index).
    std::size_t predict_index(std::span<const std::uint8_t> dense_row) const;
    std::size_t depth() const;
    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

/// Sorted distinct labels of `y`, and `y` as indices into them.
struct EncodedLabels {
    std::vector<CategoryLabel> labels;
    std::vector<std::uint32_t> index;
};

EncodedLabels encode_labels(std::span<const CategoryLabel> y);

/// CART with Gini impurity over `features_per_split` features sampled from
/// the features not yet used on the path and not constant within the node.
/// Among equally good splits the smallest feature index wins. Throws
/// ShapeMismatch when X and y disagree or are empty.
DecisionTree fit_tree(const BinaryMatrix& X, std::span<const std::uint32_t> y, std::size_t n_labels,
                      const TreeParams& params, Rng& rng);

struct ForestParams {
    std::size_t n_trees = 75;
    std::optional<int> max_depth;
    std::size_t features_per_split = 1;
    bool bootstrap = true;
    std::size_t workers = 1;
};

class ForestModel {
public:
    ForestModel() = default;

    const std::vector<CategoryLabel>& labels() const noexcept { return labels_; }
    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    std::size_t n_features() const noexcept { return n_features_; }
    const ForestParams& params() const noexcept { return params_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const std::string& dictionary_hash() const noexcept { return dictionary_hash_; }
    void set_dictionary_hash(std::string h) { dictionary_hash_ = std::move(h); }

    /// Votes per label index; sums to the tree count.
    std::vector<std::uint32_t> votes(std::span<const std::uint8_t> dense_row) const;
    /// Throws ShapeMismatch when the row length differs from the feature space.
    CategoryLabel predict(std::span<const std::uint8_t> dense_row) const;
    std::vector<CategoryLabel> predict(const BinaryMatrix& X) const;

    nlohmann::ordered_json to_json() const;
    /// Throws ModelMismatch when `expected_dictionary_hash` differs from the
    /// stored one, Error on structural problems.
    static ForestModel from_json(const nlohmann::json& j, const std::string& expected_dictionary_hash);

    friend bool operator==(const ForestModel& a, const ForestModel& b)
    {
        return a.labels_ == b.labels_ && a.trees_ == b.trees_ && a.n_features_ == b.n_features_ &&
               a.seed_ == b.seed_;
    }

private:
    friend ForestModel fit_forest_encoded(const BinaryMatrix&, const EncodedLabels&, const ForestParams&,
                                          std::uint64_t);

    std::vector<CategoryLabel> labels_;
    std::vector<DecisionTree> trees_;
    std::size_t n_features_ = 0;
    ForestParams params_;
    std::uint64_t seed_ = 0;
    std::string dictionary_hash_;
};

/// Tree i is grown on a bootstrap sample drawn with an rng seeded from
/// (seed, i). Throws SingleClass for fewer than two labels.
ForestModel fit_forest(const BinaryMatrix& X, std::span<const CategoryLabel> y, const ForestParams& params,
                       std::uint64_t seed);
/// As fit_forest, but a single label is allowed (every tree is one leaf).
ForestModel fit_forest_encoded(const BinaryMatrix& X, const EncodedLabels& y, const ForestParams& params,
                               std::uint64_t seed);

struct HyperGrid {
    std::vector<std::optional<int>> max_depth;
    std::vector<std::size_t> features_per_split;
    std::size_t folds = 3;
};

/// max_depth {8, 16, 32, unlimited}; features_per_split {ceil(sqrt d), ceil(d/4), ceil(d/2)}.
HyperGrid default_grid(std::size_t n_features);

/// Resolves "sqrt", "quarter", "half" or a positive integer against d,
/// clamped to [1, max(d, 1)].
std::size_t resolve_features_per_split(const nlohmann::json& spec, std::size_t n_features);

struct CvPoint {
    std::optional<int> max_depth;
    std::size_t features_per_split = 1;
    std::vector<double> fold_accuracy;
    double mean_accuracy = 0.0;
};

struct GridSearchResult {
    std::optional<int> max_depth;
    std::size_t features_per_split = 1;
    std::vector<CvPoint> table;

    nlohmann::ordered_json to_json() const;
};

/// Assigns rows to `folds` stratified folds: each label's rows are shuffled
/// and dealt round-robin.
std::vector<std::uint32_t> stratified_folds(std::span<const std::uint32_t> y, std::size_t folds, std::uint64_t seed);

/// Stratified k-fold mean accuracy per grid point. Ties go to the smaller
/// max_depth (unlimited counts as largest), then the smaller
/// features_per_split. Throws TooFewRows when rows < folds.
GridSearchResult grid_search_cv(const BinaryMatrix& X, std::span<const CategoryLabel> y, const HyperGrid& grid,
                                std::uint64_t seed, std::size_t n_trees = 75, std::size_t workers = 1);

nlohmann::json depth_to_json(const std::optional<int>& d);
std::optional<int> depth_from_json(const nlohmann::json& j);

} // namespace osfp
