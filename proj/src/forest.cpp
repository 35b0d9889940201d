#include "osfp/forest.hpp"

#include "osfp/error.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace osfp {

void BinaryMatrix::add_row(std::span<const std::uint32_t> set_columns)
{
    std::size_t start = columns_.size();
    for (auto c : set_columns) {
        if (c >= cols_)
            throw ShapeMismatch("column " + std::to_string(c) + " outside " + std::to_string(cols_) + " columns");
        columns_.push_back(c);
    }
    auto first = columns_.begin() + static_cast<std::ptrdiff_t>(start);
    std::sort(first, columns_.end());
    columns_.erase(std::unique(first, columns_.end()), columns_.end());
    offsets_.push_back(columns_.size());
}

void BinaryMatrix::add_dense_row(std::span<const std::uint8_t> bits)
{
    if (bits.size() != cols_)
        throw ShapeMismatch("row has " + std::to_string(bits.size()) + " bits, expected " + std::to_string(cols_));
    for (std::size_t c = 0; c < bits.size(); ++c)
        if (bits[c])
            columns_.push_back(static_cast<std::uint32_t>(c));
    offsets_.push_back(columns_.size());
}

bool BinaryMatrix::get(std::size_t r, std::size_t c) const
{
    auto cols = row(r);
    return std::binary_search(cols.begin(), cols.end(), static_cast<std::uint32_t>(c));
}

BinaryMatrix BinaryMatrix::select_rows(std::span<const std::uint32_t> rows) const
{
    BinaryMatrix out(cols_);
    for (auto r : rows)
        out.add_row(row(r));
    return out;
}

BinaryMatrix BinaryMatrix::permute_columns(std::span<const std::uint32_t> perm) const
{
    if (perm.size() != cols_)
        throw ShapeMismatch("permutation length differs from column count");
    std::vector<std::uint32_t> inverse(cols_);
    for (std::size_t j = 0; j < perm.size(); ++j)
        inverse[perm[j]] = static_cast<std::uint32_t>(j);
    BinaryMatrix out(cols_);
    std::vector<std::uint32_t> buf;
    for (std::size_t r = 0; r < rows(); ++r) {
        buf.clear();
        for (auto c : row(r))
            buf.push_back(inverse[c]);
        out.add_row(buf);
    }
    return out;
}

namespace {

using u128 = unsigned __int128;

std::size_t argmax_index(std::span<const std::uint64_t> counts)
{
    std::size_t best = 0;
    for (std::size_t k = 1; k < counts.size(); ++k)
        if (counts[k] > counts[best])
            best = k;
    return best;
}

class Grower {
public:
    Grower(const BinaryMatrix& X, std::span<const std::uint32_t> y, std::size_t n_labels, const TreeParams& params,
           Rng& rng)
        : X_(X), y_(y), k_(n_labels), params_(params), rng_(rng), ones_(X.cols(), 0),
          ones_by_label_(X.cols() * n_labels, 0), used_(X.cols(), 0)
    {
    }

    DecisionTree grow(std::vector<std::uint32_t> rows)
    {
        build(std::move(rows), 0);
        return std::move(tree_);
    }

private:
    std::uint32_t build(std::vector<std::uint32_t> rows, int depth)
    {
        const auto index = static_cast<std::uint32_t>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        std::vector<std::uint64_t> counts(k_, 0);
        for (auto r : rows)
            ++counts[y_[r]];

        auto make_leaf = [&] {
            tree_.nodes[index].counts = std::move(counts);
            return index;
        };

        std::size_t present = 0;
        for (auto c : counts)
            present += c > 0;
        if (present <= 1 || (params_.max_depth && depth >= *params_.max_depth))
            return make_leaf();

        const std::uint64_t n = rows.size();
        touched_.clear();
        for (auto r : rows) {
            const std::uint32_t label = y_[r];
            for (auto f : X_.row(r)) {
                if (ones_[f]++ == 0)
                    touched_.push_back(f);
                ++ones_by_label_[f * k_ + label];
            }
        }
        pool_.clear();
        for (auto f : touched_)
            if (!used_[f] && ones_[f] < n)
                pool_.push_back(f);
        std::sort(pool_.begin(), pool_.end());

        std::optional<std::uint32_t> best;
        u128 best_num = 0, best_den = 1;
        if (!pool_.empty()) {
            const std::size_t m = std::min(std::max<std::size_t>(params_.features_per_split, 1), pool_.size());
            if (m < pool_.size()) {
                for (std::size_t i = 0; i < m; ++i) {
                    std::size_t j = i + static_cast<std::size_t>(rng_.below(pool_.size() - i));
                    std::swap(pool_[i], pool_[j]);
                }
                pool_.resize(m);
                std::sort(pool_.begin(), pool_.end());
            }
            // Weighted Gini is minimized where sum c1^2/n1 + sum c0^2/n0 is maximal.
            for (auto f : pool_) {
                const std::uint64_t n1 = ones_[f], n0 = n - n1;
                u128 a = 0, b = 0;
                for (std::size_t k = 0; k < k_; ++k) {
                    const std::uint64_t c1 = ones_by_label_[f * k_ + k], c0 = counts[k] - c1;
                    a += static_cast<u128>(c1) * c1;
                    b += static_cast<u128>(c0) * c0;
                }
                const u128 num = a * n0 + b * n1, den = static_cast<u128>(n1) * n0;
                if (!best || num * best_den > best_num * den) {
                    best = f;
                    best_num = num;
                    best_den = den;
                }
            }
        }
        for (auto f : touched_) {
            ones_[f] = 0;
            std::fill_n(ones_by_label_.begin() + static_cast<std::ptrdiff_t>(f * k_), k_, 0);
        }
        if (!best)
            return make_leaf();
        u128 parent = 0;
        for (auto c : counts)
            parent += static_cast<u128>(c) * c;
        if (!(best_num * n > parent * best_den))
            return make_leaf();

        const std::uint32_t f = *best;
        std::vector<std::uint32_t> zero, one;
        for (auto r : rows)
            (X_.get(r, f) ? one : zero).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        used_[f] = 1;
        tree_.nodes[index].feature = static_cast<std::int32_t>(f);
        const std::uint32_t z = build(std::move(zero), depth + 1);
        tree_.nodes[index].zero_child = z;
        const std::uint32_t o = build(std::move(one), depth + 1);
        tree_.nodes[index].one_child = o;
        used_[f] = 0;
        return index;
    }

    const BinaryMatrix& X_;
    std::span<const std::uint32_t> y_;
    std::size_t k_;
    TreeParams params_;
    Rng& rng_;
    std::vector<std::uint64_t> ones_;
    std::vector<std::uint64_t> ones_by_label_;
    std::vector<std::uint8_t> used_;
    std::vector<std::uint32_t> touched_;
    std::vector<std::uint32_t> pool_;
    DecisionTree tree_;
};

std::vector<DecisionTree> grow_forest(const BinaryMatrix& X, std::span<const std::uint32_t> y, std::size_t n_labels,
                                      std::span<const std::uint32_t> rows, const ForestParams& params,
                                      std::uint64_t seed)
{
    std::vector<DecisionTree> trees(params.n_trees);
    const TreeParams tp{params.max_depth, params.features_per_split};
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t t = first; t < params.n_trees; t += stride) {
            Rng rng(substream_seed(seed, t));
            std::vector<std::uint32_t> sample;
            if (params.bootstrap) {
                sample.resize(rows.size());
                for (auto& s : sample)
                    s = rows[rng.below(rows.size())];
            } else {
                sample.assign(rows.begin(), rows.end());
            }
            trees[t] = Grower(X, y, n_labels, tp, rng).grow(std::move(sample));
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(params.workers, 1, std::max<std::size_t>(params.n_trees, 1));
    if (workers == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(work, w, workers);
        for (auto& t : pool)
            t.join();
    }
    return trees;
}

void dense_row(const BinaryMatrix& X, std::size_t r, std::vector<std::uint8_t>& buf)
{
    std::fill(buf.begin(), buf.end(), 0);
    for (auto c : X.row(r))
        buf[c] = 1;
}

} // namespace

std::size_t DecisionTree::predict_index(std::span<const std::uint8_t> row) const
{
    std::size_t i = 0;
    while (!nodes[i].is_leaf())
        i = row[static_cast<std::size_t>(nodes[i].feature)] ? nodes[i].one_child : nodes[i].zero_child;
    return argmax_index(nodes[i].counts);
}

std::size_t DecisionTree::depth() const
{
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes[i].is_leaf())
            d[nodes[i].zero_child] = d[nodes[i].one_child] = d[i] + 1;
    }
    return best;
}

EncodedLabels encode_labels(std::span<const CategoryLabel> y)
{
    EncodedLabels e;
    e.labels.assign(y.begin(), y.end());
    std::sort(e.labels.begin(), e.labels.end());
    e.labels.erase(std::unique(e.labels.begin(), e.labels.end()), e.labels.end());
    e.index.reserve(y.size());
    for (const auto& l : y)
        e.index.push_back(
            static_cast<std::uint32_t>(std::lower_bound(e.labels.begin(), e.labels.end(), l) - e.labels.begin()));
    return e;
}

DecisionTree fit_tree(const BinaryMatrix& X, std::span<const std::uint32_t> y, std::size_t n_labels,
                      const TreeParams& params, Rng& rng)
{
    if (X.rows() != y.size())
        throw ShapeMismatch("X has " + std::to_string(X.rows()) + " rows, y has " + std::to_string(y.size()));
    if (X.rows() == 0)
        throw ShapeMismatch("no training rows");
    for (auto v : y)
        if (v >= n_labels)
            throw ShapeMismatch("label index out of range");
    std::vector<std::uint32_t> rows(X.rows());
    for (std::size_t i = 0; i < rows.size(); ++i)
        rows[i] = static_cast<std::uint32_t>(i);
    return Grower(X, y, n_labels, params, rng).grow(std::move(rows));
}

ForestModel fit_forest_encoded(const BinaryMatrix& X, const EncodedLabels& y, const ForestParams& params,
                               std::uint64_t seed)
{
    if (X.rows() != y.index.size())
        throw ShapeMismatch("X has " + std::to_string(X.rows()) + " rows, y has " + std::to_string(y.index.size()));
    if (X.rows() == 0)
        throw ShapeMismatch("no training rows");
    if (params.n_trees == 0)
        throw Error("n_trees must be positive");
    std::vector<std::uint32_t> rows(X.rows());
    for (std::size_t i = 0; i < rows.size(); ++i)
        rows[i] = static_cast<std::uint32_t>(i);
    ForestModel m;
    m.labels_ = y.labels;
    m.n_features_ = X.cols();
    m.params_ = params;
    m.seed_ = seed;
    m.trees_ = grow_forest(X, y.index, y.labels.size(), rows, params, seed);
    return m;
}

ForestModel fit_forest(const BinaryMatrix& X, std::span<const CategoryLabel> y, const ForestParams& params,
                       std::uint64_t seed)
{
    EncodedLabels e = encode_labels(y);
    if (e.labels.size() < 2)
        throw SingleClass("forest training needs at least two labels");
    return fit_forest_encoded(X, e, params, seed);
}

std::vector<std::uint32_t> ForestModel::votes(std::span<const std::uint8_t> row) const
{
    if (row.size() != n_features_)
        throw ShapeMismatch("vector has " + std::to_string(row.size()) + " features, model expects " +
                            std::to_string(n_features_));
    std::vector<std::uint32_t> v(labels_.size(), 0);
    for (const auto& t : trees_)
        ++v[t.predict_index(row)];
    return v;
}

CategoryLabel ForestModel::predict(std::span<const std::uint8_t> row) const
{
    auto v = votes(row);
    std::size_t best = 0;
    for (std::size_t k = 1; k < v.size(); ++k)
        if (v[k] > v[best])
            best = k;
    return labels_[best];
}

std::vector<CategoryLabel> ForestModel::predict(const BinaryMatrix& X) const
{
    if (X.cols() != n_features_)
        throw ShapeMismatch("matrix has " + std::to_string(X.cols()) + " features, model expects " +
                            std::to_string(n_features_));
    std::vector<CategoryLabel> out;
    out.reserve(X.rows());
    std::vector<std::uint8_t> buf(X.cols());
    for (std::size_t r = 0; r < X.rows(); ++r) {
        dense_row(X, r, buf);
        out.push_back(predict(buf));
    }
    return out;
}

nlohmann::json depth_to_json(const std::optional<int>& d)
{
    return d ? nlohmann::json(*d) : nlohmann::json(nullptr);
}

std::optional<int> depth_from_json(const nlohmann::json& j)
{
    if (j.is_null() || (j.is_string() && j.get<std::string>() == "unlimited"))
        return std::nullopt;
    if (!j.is_number_integer() || j.get<int>() < 0)
        throw Error("max_depth must be a non-negative integer or \"unlimited\"");
    return j.get<int>();
}

nlohmann::ordered_json ForestModel::to_json() const
{
    nlohmann::ordered_json labels = nlohmann::ordered_json::array();
    for (const auto& l : labels_)
        labels.push_back(l.str());
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& t : trees_) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const auto& n : t.nodes) {
            if (n.is_leaf())
                nodes.push_back({{"counts", n.counts}});
            else
                nodes.push_back({{"f", n.feature}, {"z", n.zero_child}, {"o", n.one_child}});
        }
        trees.push_back(std::move(nodes));
    }
    return {{"format", "osfp-forest"},
            {"params",
             {{"n_trees", params_.n_trees},
              {"max_depth", depth_to_json(params_.max_depth)},
              {"features_per_split", params_.features_per_split},
              {"bootstrap", params_.bootstrap}}},
            {"seed", seed_},
            {"labels", std::move(labels)},
            {"n_features", n_features_},
            {"dictionary_hash", dictionary_hash_},
            {"trees", std::move(trees)}};
}

ForestModel ForestModel::from_json(const nlohmann::json& j, const std::string& expected_dictionary_hash)
{
    ForestModel m;
    try {
        if (j.at("format") != "osfp-forest")
            throw Error("not a forest model");
        m.dictionary_hash_ = j.at("dictionary_hash").get<std::string>();
        if (m.dictionary_hash_ != expected_dictionary_hash)
            throw ModelMismatch("model was trained on a different feature dictionary");
        const auto& p = j.at("params");
        m.params_.n_trees = p.at("n_trees").get<std::size_t>();
        m.params_.max_depth = depth_from_json(p.at("max_depth"));
        m.params_.features_per_split = p.at("features_per_split").get<std::size_t>();
        m.params_.bootstrap = p.at("bootstrap").get<bool>();
        m.seed_ = j.at("seed").get<std::uint64_t>();
        m.n_features_ = j.at("n_features").get<std::size_t>();
        for (const auto& l : j.at("labels"))
            m.labels_.emplace_back(l.get<std::string>());
        if (!std::is_sorted(m.labels_.begin(), m.labels_.end()) || m.labels_.empty())
            throw Error("model labels must be non-empty and sorted");
        for (const auto& tj : j.at("trees")) {
            DecisionTree t;
            for (const auto& nj : tj) {
                TreeNode n;
                if (nj.contains("counts")) {
                    n.counts = nj.at("counts").get<std::vector<std::uint64_t>>();
                    if (n.counts.size() != m.labels_.size())
                        throw Error("leaf count vector has the wrong length");
                } else {
                    n.feature = nj.at("f").get<std::int32_t>();
                    n.zero_child = nj.at("z").get<std::uint32_t>();
                    n.one_child = nj.at("o").get<std::uint32_t>();
                    if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= m.n_features_)
                        throw Error("split feature out of range");
                }
                t.nodes.push_back(std::move(n));
            }
            if (t.nodes.empty())
                throw Error("empty tree");
            for (std::size_t i = 0; i < t.nodes.size(); ++i) {
                const auto& n = t.nodes[i];
                if (!n.is_leaf() && (n.zero_child <= i || n.one_child <= i || n.zero_child >= t.nodes.size() ||
                                     n.one_child >= t.nodes.size()))
                    throw Error("child index out of range");
            }
            m.trees_.push_back(std::move(t));
        }
        if (m.trees_.size() != m.params_.n_trees)
            throw Error("tree count differs from n_trees");
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("bad forest JSON: ") + e.what());
    }
    return m;
}

HyperGrid default_grid(std::size_t d)
{
    HyperGrid g;
    g.max_depth = {8, 16, 32, std::nullopt};
    for (const char* s : {"sqrt", "quarter", "half"})
        g.features_per_split.push_back(resolve_features_per_split(s, d));
    return g;
}

std::size_t resolve_features_per_split(const nlohmann::json& spec, std::size_t d)
{
    const double dd = static_cast<double>(d);
    std::size_t v;
    if (spec.is_string()) {
        const auto s = spec.get<std::string>();
        if (s == "sqrt")
            v = static_cast<std::size_t>(std::ceil(std::sqrt(dd)));
        else if (s == "quarter")
            v = (d + 3) / 4;
        else if (s == "half")
            v = (d + 1) / 2;
        else if (s == "all")
            v = d;
        else
            throw Error("unknown features_per_split: " + s);
    } else if (spec.is_number_integer() && spec.get<long long>() > 0) {
        v = spec.get<std::size_t>();
    } else {
        throw Error("features_per_split must be a positive integer or sqrt/quarter/half/all");
    }
    return std::clamp<std::size_t>(v, 1, std::max<std::size_t>(d, 1));
}

nlohmann::ordered_json GridSearchResult::to_json() const
{
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& p : table)
        rows.push_back({{"max_depth", depth_to_json(p.max_depth)},
                        {"features_per_split", p.features_per_split},
                        {"fold_accuracy", p.fold_accuracy},
                        {"mean_accuracy", p.mean_accuracy}});
    return {{"chosen", {{"max_depth", depth_to_json(max_depth)}, {"features_per_split", features_per_split}}},
            {"table", std::move(rows)}};
}

std::vector<std::uint32_t> stratified_folds(std::span<const std::uint32_t> y, std::size_t folds, std::uint64_t seed)
{
    std::uint32_t k = 0;
    for (auto v : y)
        k = std::max(k, v + 1);
    std::vector<std::vector<std::uint32_t>> by_label(k);
    for (std::size_t i = 0; i < y.size(); ++i)
        by_label[y[i]].push_back(static_cast<std::uint32_t>(i));
    Rng rng(seed);
    std::vector<std::uint32_t> fold(y.size(), 0);
    std::size_t next = 0;
    for (auto& rows : by_label) {
        for (std::size_t i = rows.size(); i > 1; --i)
            std::swap(rows[i - 1], rows[rng.below(i)]);
        for (auto r : rows)
            fold[r] = static_cast<std::uint32_t>(next++ % folds);
    }
    return fold;
}

GridSearchResult grid_search_cv(const BinaryMatrix& X, std::span<const CategoryLabel> y, const HyperGrid& grid,
                                std::uint64_t seed, std::size_t n_trees, std::size_t workers)
{
    if (X.rows() != y.size())
        throw ShapeMismatch("X has " + std::to_string(X.rows()) + " rows, y has " + std::to_string(y.size()));
    if (grid.max_depth.empty() || grid.features_per_split.empty())
        throw Error("hyperparameter grid is empty");
    if (grid.folds < 2)
        throw Error("cross-validation needs at least two folds");
    if (X.rows() < grid.folds)
        throw TooFewRows(std::to_string(X.rows()) + " rows cannot fill " + std::to_string(grid.folds) + " folds");

    const EncodedLabels e = encode_labels(y);
    const auto fold = stratified_folds(e.index, grid.folds, substream_seed(seed, 0x5f01d));

    auto depths = grid.max_depth;
    std::sort(depths.begin(), depths.end(), [](const auto& a, const auto& b) {
        if (!a || !b)
            return a.has_value() && !b.has_value();
        return *a < *b;
    });
    depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
    auto fps = grid.features_per_split;
    std::sort(fps.begin(), fps.end());
    fps.erase(std::unique(fps.begin(), fps.end()), fps.end());

    GridSearchResult result;
    double best = -1.0;
    std::vector<std::uint8_t> buf(X.cols());
    for (const auto& depth : depths) {
        for (auto f : fps) {
            CvPoint point{depth, f, {}, 0.0};
            ForestParams params{n_trees, depth, f, true, workers};
            for (std::size_t k = 0; k < grid.folds; ++k) {
                std::vector<std::uint32_t> train;
                for (std::size_t r = 0; r < X.rows(); ++r)
                    if (fold[r] != k)
                        train.push_back(static_cast<std::uint32_t>(r));
                const auto trees = grow_forest(X, e.index, e.labels.size(), train, params, substream_seed(seed, 0xcf, k));
                std::size_t correct = 0, total = 0;
                std::vector<std::uint32_t> v(e.labels.size());
                for (std::size_t r = 0; r < X.rows(); ++r) {
                    if (fold[r] != k)
                        continue;
                    dense_row(X, r, buf);
                    std::fill(v.begin(), v.end(), 0);
                    for (const auto& t : trees)
                        ++v[t.predict_index(buf)];
                    std::size_t pred = 0;
                    for (std::size_t c = 1; c < v.size(); ++c)
                        if (v[c] > v[pred])
                            pred = c;
                    correct += pred == e.index[r];
                    ++total;
                }
                point.fold_accuracy.push_back(total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0);
            }
            double sum = 0.0;
            for (auto a : point.fold_accuracy)
                sum += a;
            point.mean_accuracy = sum / static_cast<double>(grid.folds);
            if (point.mean_accuracy > best) {
                best = point.mean_accuracy;
                result.max_depth = depth;
                result.features_per_split = f;
            }
            result.table.push_back(std::move(point));
        }
    }
    return result;
}

} // namespace osfp
