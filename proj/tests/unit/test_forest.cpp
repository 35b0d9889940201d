#include "cart_oracle.hpp"

#include "osfp/error.hpp"
#include "osfp/forest.hpp"

#include <doctest.h>

using namespace osfp;

namespace {

struct Dataset {
    BinaryMatrix X;
    std::vector<std::vector<std::uint8_t>> dense;
    std::vector<std::uint32_t> y;
};

Dataset random_dataset(Rng& rng, std::size_t rows, std::size_t cols, std::uint32_t labels)
{
    Dataset d{BinaryMatrix(cols), {}, {}};
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<std::uint8_t> bits(cols);
        for (auto& b : bits)
            b = rng.bernoulli(0.5);
        d.X.add_dense_row(bits);
        d.dense.push_back(bits);
        d.y.push_back(static_cast<std::uint32_t>(rng.below(labels)));
    }
    return d;
}

std::vector<CategoryLabel> named(const std::vector<std::uint32_t>& y)
{
    std::vector<CategoryLabel> out;
    for (auto v : y)
        out.emplace_back("L" + std::to_string(v));
    return out;
}

/// Two informative columns plus noise; label = col0 | 2*col1.
Dataset structured(Rng& rng, std::size_t rows, std::size_t noise)
{
    Dataset d{BinaryMatrix(2 + noise), {}, {}};
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<std::uint8_t> bits(2 + noise);
        for (auto& b : bits)
            b = rng.bernoulli(0.5);
        d.X.add_dense_row(bits);
        d.dense.push_back(bits);
        d.y.push_back(static_cast<std::uint32_t>(bits[0] | (bits[1] << 1)));
    }
    return d;
}

} // namespace

TEST_CASE("binary matrix helpers")
{
    BinaryMatrix m(4);
    std::vector<std::uint32_t> r0{3, 1, 1};
    m.add_row(r0);
    std::vector<std::uint8_t> r1{1, 0, 0, 1};
    m.add_dense_row(r1);
    CHECK(m.rows() == 2);
    CHECK(m.row(0).size() == 2);
    CHECK(m.row(0)[0] == 1);
    CHECK(m.get(0, 3));
    CHECK_FALSE(m.get(0, 0));
    CHECK(m.get(1, 0));

    std::vector<std::uint32_t> pick{1, 1, 0};
    auto s = m.select_rows(pick);
    CHECK(s.rows() == 3);
    CHECK(s.get(0, 0));
    CHECK(s.get(2, 1));

    std::vector<std::uint32_t> perm{3, 2, 1, 0};
    auto p = m.permute_columns(perm);
    CHECK(p.get(0, 0));
    CHECK(p.get(0, 2));
    CHECK(p.get(1, 3));
    CHECK_FALSE(p.get(1, 1));

    std::vector<std::uint32_t> out_of_range{4};
    CHECK_THROWS(m.add_row(out_of_range));
}

TEST_CASE("single trees agree with the exhaustive oracle")
{
    Rng rng(2024);
    int agree = 0, total = 0;
    for (int c = 0; c < 400; ++c) {
        std::size_t rows = 1 + rng.below(8), cols = 1 + rng.below(4);
        auto d = random_dataset(rng, rows, cols, 2);
        std::optional<int> depth;
        if (rng.bernoulli(0.5))
            depth = static_cast<int>(rng.below(4));
        Rng tree_rng(c);
        auto tree = fit_tree(d.X, d.y, 2, TreeParams{depth, cols}, tree_rng);
        std::vector<int> yi(d.y.begin(), d.y.end());
        oracle::Cart ref(d.dense, yi, 2, depth);
        for (std::uint32_t m = 0; m < (1u << cols); ++m) {
            std::vector<std::uint8_t> row(cols);
            for (std::size_t j = 0; j < cols; ++j)
                row[j] = (m >> j) & 1;
            ++total;
            agree += static_cast<int>(tree.predict_index(row)) == ref.predict(row);
        }
        if (depth)
            CHECK(tree.depth() <= static_cast<std::size_t>(*depth));
    }
    CHECK(agree == total);
}

TEST_CASE("multi-label trees agree with the oracle")
{
    Rng rng(99);
    for (int c = 0; c < 200; ++c) {
        std::size_t rows = 2 + rng.below(10), cols = 1 + rng.below(5);
        auto d = random_dataset(rng, rows, cols, 4);
        Rng tree_rng(c);
        auto tree = fit_tree(d.X, d.y, 4, TreeParams{std::nullopt, cols}, tree_rng);
        oracle::Cart ref(d.dense, std::vector<int>(d.y.begin(), d.y.end()), 4, std::nullopt);
        for (const auto& row : d.dense)
            CHECK(static_cast<int>(tree.predict_index(row)) == ref.predict(row));
    }
}

TEST_CASE("unpruned trees fit consistent training data")
{
    Rng rng(5);
    auto d = structured(rng, 60, 3);
    Rng tree_rng(1);
    auto tree = fit_tree(d.X, d.y, 4, TreeParams{std::nullopt, 1}, tree_rng);
    for (std::size_t r = 0; r < d.dense.size(); ++r)
        CHECK(tree.predict_index(d.dense[r]) == d.y[r]);
}

TEST_CASE("fit_tree shape errors")
{
    BinaryMatrix X(2);
    std::vector<std::uint32_t> y{0};
    Rng rng(1);
    CHECK_THROWS_AS(fit_tree(X, y, 1, {}, rng), ShapeMismatch);
    std::vector<std::uint32_t> none;
    CHECK_THROWS_AS(fit_tree(X, none, 1, {}, rng), ShapeMismatch);
}

TEST_CASE("forest is deterministic and independent of worker count")
{
    Rng rng(8);
    auto d = structured(rng, 120, 10);
    auto y = named(d.y);
    ForestParams p;
    p.n_trees = 20;
    p.features_per_split = 3;
    auto a = fit_forest(d.X, y, p, 77);
    auto b = fit_forest(d.X, y, p, 77);
    p.workers = 4;
    auto c = fit_forest(d.X, y, p, 77);
    CHECK(a == b);
    CHECK(a == c);
    p.workers = 1;
    auto other = fit_forest(d.X, y, p, 78);
    CHECK_FALSE(a == other);

    std::size_t correct = 0;
    for (std::size_t r = 0; r < d.dense.size(); ++r)
        correct += a.predict(d.dense[r]) == y[r];
    CHECK(correct >= 110);
    auto votes = a.votes(d.dense[0]);
    std::uint32_t sum = 0;
    for (auto v : votes)
        sum += v;
    CHECK(sum == 20);
    CHECK(a.predict(d.X).size() == 120);
}

TEST_CASE("forest JSON round trip and dictionary check")
{
    Rng rng(3);
    auto d = structured(rng, 40, 2);
    auto y = named(d.y);
    ForestParams p;
    p.n_trees = 5;
    p.max_depth = 3;
    auto m = fit_forest(d.X, y, p, 1);
    m.set_dictionary_hash("abc");
    auto j = nlohmann::json::parse(m.to_json().dump());
    auto back = ForestModel::from_json(j, "abc");
    CHECK(back == m);
    CHECK(back.params().max_depth == 3);
    for (const auto& row : d.dense)
        CHECK(back.predict(row) == m.predict(row));
    CHECK_THROWS_AS(ForestModel::from_json(j, "xyz"), ModelMismatch);
    j["trees"].erase(0);
    CHECK_THROWS_AS(ForestModel::from_json(j, "abc"), Error);
}

TEST_CASE("forest input errors")
{
    BinaryMatrix X(2);
    std::vector<std::uint8_t> r{1, 0};
    X.add_dense_row(r);
    X.add_dense_row(r);
    std::vector<CategoryLabel> same{CategoryLabel("a"), CategoryLabel("a")};
    CHECK_THROWS_AS(fit_forest(X, same, {}, 1), SingleClass);
    std::vector<CategoryLabel> three{CategoryLabel("a"), CategoryLabel("b"), CategoryLabel("a")};
    CHECK_THROWS_AS(fit_forest(X, three, {}, 1), ShapeMismatch);

    std::vector<CategoryLabel> two{CategoryLabel("a"), CategoryLabel("b")};
    ForestParams p;
    p.n_trees = 2;
    auto m = fit_forest(X, two, p, 1);
    std::vector<std::uint8_t> wrong{1};
    CHECK_THROWS_AS(m.predict(wrong), ShapeMismatch);
}

TEST_CASE("features per split resolution")
{
    CHECK(resolve_features_per_split("sqrt", 10) == 4);
    CHECK(resolve_features_per_split("quarter", 10) == 3);
    CHECK(resolve_features_per_split("half", 9) == 5);
    CHECK(resolve_features_per_split("all", 7) == 7);
    CHECK(resolve_features_per_split(50, 7) == 7);
    CHECK(resolve_features_per_split("sqrt", 0) == 1);
    CHECK_THROWS(resolve_features_per_split("third", 7));
    CHECK_THROWS(resolve_features_per_split(0, 7));
    auto g = default_grid(100);
    CHECK(g.max_depth.size() == 4);
    CHECK(g.features_per_split == std::vector<std::size_t>{10, 25, 50});
    CHECK(depth_from_json("unlimited") == std::nullopt);
    CHECK(depth_from_json(8) == 8);
    CHECK(depth_to_json(std::nullopt).is_null());
}

TEST_CASE("stratified folds balance every label")
{
    std::vector<std::uint32_t> y;
    for (int i = 0; i < 30; ++i)
        y.push_back(i % 3 == 0 ? 1 : 0);
    auto f = stratified_folds(y, 3, 4);
    std::vector<int> per_fold_label1(3, 0), per_fold(3, 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        ++per_fold[f[i]];
        per_fold_label1[f[i]] += y[i] == 1;
    }
    for (int k = 0; k < 3; ++k) {
        CHECK(per_fold[k] == 10);
        CHECK(per_fold_label1[k] >= 3);
        CHECK(per_fold_label1[k] <= 4);
    }
    CHECK(stratified_folds(y, 3, 4) == f);
}

TEST_CASE("grid search")
{
    Rng rng(12);
    auto d = structured(rng, 90, 6);
    auto y = named(d.y);
    HyperGrid g{{1, std::nullopt}, {1, 8}, 3};
    auto r = grid_search_cv(d.X, y, g, 5, 10);
    CHECK(r.table.size() == 4);
    CHECK(r.table.front().max_depth == 1);
    CHECK(r.table.back().max_depth == std::nullopt);
    CHECK(r.max_depth == std::nullopt);
    for (const auto& p : r.table)
        CHECK(p.fold_accuracy.size() == 3);
    auto again = grid_search_cv(d.X, y, g, 5, 10);
    CHECK(again.to_json() == r.to_json());

    BinaryMatrix tiny(1);
    std::vector<std::uint8_t> row{1};
    tiny.add_dense_row(row);
    tiny.add_dense_row(row);
    std::vector<CategoryLabel> ty{CategoryLabel("a"), CategoryLabel("b")};
    CHECK_THROWS_AS(grid_search_cv(tiny, ty, g, 1), TooFewRows);
}
