#include "cart_oracle.hpp"

#include <numeric>

namespace oracle {

namespace {

struct Frac {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Frac(std::int64_t n = 0, std::int64_t d = 1) : num(n), den(d) { reduce(); }
    void reduce()
    {
        auto g = std::gcd(num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }
};

Frac operator+(Frac a, Frac b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
Frac operator-(Frac a, Frac b) { return {a.num * b.den - b.num * a.den, a.den * b.den}; }
Frac operator*(Frac a, Frac b) { return {a.num * b.num, a.den * b.den}; }
bool operator<(Frac a, Frac b) { return a.num * b.den < b.num * a.den; }

// 1 - sum p_k^2
Frac gini(const std::vector<int>& counts)
{
    int n = std::accumulate(counts.begin(), counts.end(), 0);
    Frac g(1);
    for (int c : counts)
        g = g - Frac(c, n) * Frac(c, n);
    return g;
}

} // namespace

Cart::Cart(std::vector<std::vector<std::uint8_t>> rows, std::vector<int> labels, int n_labels,
           std::optional<int> max_depth)
    : rows_(std::move(rows)), labels_(std::move(labels)), n_labels_(n_labels), max_depth_(max_depth)
{
    std::vector<int> all(rows_.size());
    std::iota(all.begin(), all.end(), 0);
    grow(all, std::vector<bool>(rows_.empty() ? 0 : rows_[0].size(), false), 0);
}

int Cart::grow(const std::vector<int>& idx, std::vector<bool> used, int depth)
{
    std::vector<int> counts(n_labels_, 0);
    for (int i : idx)
        ++counts[labels_[i]];
    int node = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    int best_label = 0;
    for (int k = 1; k < n_labels_; ++k)
        if (counts[k] > counts[best_label])
            best_label = k;
    nodes_[node].label = best_label;

    if (max_depth_ && depth >= *max_depth_)
        return node;
    const Frac parent = gini(counts);
    const int n = static_cast<int>(idx.size());
    int best = -1;
    Frac best_score;
    for (std::size_t f = 0; f < used.size(); ++f) {
        if (used[f])
            continue;
        std::vector<int> c0(n_labels_, 0), c1(n_labels_, 0);
        int n0 = 0, n1 = 0;
        for (int i : idx) {
            if (rows_[i][f]) {
                ++c1[labels_[i]];
                ++n1;
            } else {
                ++c0[labels_[i]];
                ++n0;
            }
        }
        if (n0 == 0 || n1 == 0)
            continue;
        Frac score = Frac(n0, n) * gini(c0) + Frac(n1, n) * gini(c1);
        if (best < 0 || score < best_score) {
            best = static_cast<int>(f);
            best_score = score;
        }
    }
    if (best < 0 || !(best_score < parent))
        return node;

    std::vector<int> zero, one;
    for (int i : idx)
        (rows_[i][best] ? one : zero).push_back(i);
    used[best] = true;
    nodes_[node].feature = best;
    int z = grow(zero, used, depth + 1);
    int o = grow(one, used, depth + 1);
    nodes_[node].zero = z;
    nodes_[node].one = o;
    return node;
}

int Cart::predict(const std::vector<std::uint8_t>& row) const
{
    int at = 0;
    while (nodes_[at].feature >= 0)
        at = row[nodes_[at].feature] ? nodes_[at].one : nodes_[at].zero;
    return nodes_[at].label;
}

} // namespace oracle
