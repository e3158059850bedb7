#include "setdet/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace setdet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest-augmenting-path assignment with dual potentials. Assigns every row
// (requires rows <= cols), minimizing total cost. Deterministic for a given
// input. Returns row -> col.
std::vector<int> solve_rows_le_cols(const std::vector<double>& a, int rows, int cols) {
    std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
    std::vector<int> p(cols + 1, 0), way(cols + 1, 0);
    for (int i = 1; i <= rows; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(cols + 1, kInf);
        std::vector<char> used(cols + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = kInf;
            const double* row = a.data() + static_cast<size_t>(i0 - 1) * cols;
            for (int j = 1; j <= cols; ++j) {
                if (used[j]) continue;
                const double cur = row[j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= cols; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(rows, -1);
    for (int j = 1; j <= cols; ++j)
        if (p[j]) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

// Optimal pairs for an instance restricted to the given prediction / GT
// subsets (original indices). The smaller side is always fully matched.
std::vector<std::pair<int, int>> solve_subproblem(const CostMatrix& c,
                                                  const std::vector<int>& preds,
                                                  const std::vector<int>& gts) {
    const int np = static_cast<int>(preds.size());
    const int ng = static_cast<int>(gts.size());
    std::vector<std::pair<int, int>> pairs;
    if (np == 0 || ng == 0) return pairs;
    if (ng <= np) {
        std::vector<double> a(static_cast<size_t>(ng) * np);
        for (int i = 0; i < ng; ++i)
            for (int j = 0; j < np; ++j) a[static_cast<size_t>(i) * np + j] = c.at(preds[j], gts[i]);
        const auto gt_to_pred = solve_rows_le_cols(a, ng, np);
        for (int i = 0; i < ng; ++i) pairs.emplace_back(preds[gt_to_pred[i]], gts[i]);
    } else {
        std::vector<double> a(static_cast<size_t>(np) * ng);
        for (int i = 0; i < np; ++i)
            for (int j = 0; j < ng; ++j) a[static_cast<size_t>(i) * ng + j] = c.at(preds[i], gts[j]);
        const auto pred_to_gt = solve_rows_le_cols(a, np, ng);
        for (int i = 0; i < np; ++i) pairs.emplace_back(preds[i], gts[pred_to_gt[i]]);
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

// Costs are summed over pairs in ascending prediction order so that equal
// pair sets always produce bit-identical totals across implementations.
double direct_sum(const CostMatrix& c, const std::vector<std::pair<int, int>>& sorted_pairs) {
    double total = 0.0;
    for (const auto& [n, m] : sorted_pairs) total += c.at(n, m);
    return total;
}

// Rewrites `pairs` into the lexicographically smallest pair list among the
// exact-cost optima. Pair-by-pair fixing: prediction indices ascending, GT
// indices ascending, keep a candidate only if an optimal completion exists.
// Exact on instances whose sums carry no rounding (e.g. integer-valued
// matrices, where distinct optima can actually tie); on generic float inputs
// the optimum is unique and the fixing simply re-derives it. Falls back to
// the unrefined solution if rounding prevents a full reconstruction.
void lexicographic_refine(const CostMatrix& c, std::vector<std::pair<int, int>>& pairs,
                          double total) {
    const int want = static_cast<int>(pairs.size());
    std::vector<char> used_pred(c.n_preds, 0), used_gt(c.n_gts, 0);
    std::vector<std::pair<int, int>> fixed;
    for (int n = 0; n < c.n_preds && static_cast<int>(fixed.size()) < want; ++n) {
        for (int m = 0; m < c.n_gts; ++m) {
            if (used_gt[m]) continue;
            std::vector<int> rem_preds, rem_gts;
            for (int p = 0; p < c.n_preds; ++p)
                if (!used_pred[p] && p != n) rem_preds.push_back(p);
            for (int g = 0; g < c.n_gts; ++g)
                if (!used_gt[g] && g != m) rem_gts.push_back(g);
            auto candidate = solve_subproblem(c, rem_preds, rem_gts);
            candidate.insert(candidate.end(), fixed.begin(), fixed.end());
            candidate.emplace_back(n, m);
            std::sort(candidate.begin(), candidate.end());
            if (direct_sum(c, candidate) == total) {
                fixed.emplace_back(n, m);
                used_pred[n] = 1;
                used_gt[m] = 1;
                break;
            }
        }
    }
    if (static_cast<int>(fixed.size()) == want) {
        std::sort(fixed.begin(), fixed.end());
        pairs = std::move(fixed);
    }
}

}  // namespace

CostMatrix build_cost_matrix(const Mat& class_probs, const std::vector<Box>& pred_boxes,
                             const std::vector<GtObject>& gts, const MatchWeights& weights) {
    const int n = static_cast<int>(pred_boxes.size());
    const int m = static_cast<int>(gts.size());
    if (class_probs.rows != n)
        throw std::invalid_argument("build_cost_matrix: class_probs rows != prediction count");
    CostMatrix c;
    c.n_preds = n;
    c.n_gts = m;
    c.values.resize(static_cast<size_t>(n) * m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            if (gts[j].label < 0 || gts[j].label >= class_probs.cols)
                throw std::invalid_argument("build_cost_matrix: GT label out of range");
            const Box& bp = pred_boxes[i];
            const Box& bg = gts[j].box;
            const double l1 = std::abs(bp.cx - bg.cx) + std::abs(bp.cy - bg.cy) +
                              std::abs(bp.w - bg.w) + std::abs(bp.h - bg.h);
            c.at(i, j) = weights.cls * (-class_probs.at(i, gts[j].label)) + weights.l1 * l1 +
                         weights.giou * (-giou(bp, bg));
        }
    }
    return c;
}

Assignment hungarian_assign(const CostMatrix& c) {
    for (double v : c.values)
        if (!std::isfinite(v)) throw std::invalid_argument("hungarian_assign: non-finite cost entry");
    Assignment out;
    if (c.n_preds == 0 || c.n_gts == 0) return out;

    std::vector<int> all_preds(c.n_preds), all_gts(c.n_gts);
    for (int i = 0; i < c.n_preds; ++i) all_preds[i] = i;
    for (int j = 0; j < c.n_gts; ++j) all_gts[j] = j;
    out.pairs = solve_subproblem(c, all_preds, all_gts);
    out.total_cost = direct_sum(c, out.pairs);

    // Lexicographic tie-break is only guaranteed on small instances; every
    // instance this project produces has min(N, M) <= Kmax.
    if (std::min(c.n_preds, c.n_gts) <= 16) {
        lexicographic_refine(c, out.pairs, out.total_cost);
        out.total_cost = direct_sum(c, out.pairs);
    }
    return out;
}

Assignment brute_force_assign(const CostMatrix& c) {
    for (double v : c.values)
        if (!std::isfinite(v)) throw std::invalid_argument("brute_force_assign: non-finite cost entry");
    Assignment best;
    if (c.n_preds == 0 || c.n_gts == 0) return best;
    const int k = std::min(c.n_preds, c.n_gts);
    if (k > 8) throw std::invalid_argument("brute_force_assign: instance too large (min(N,M) > 8)");
    double count = 1.0;
    const int larger = std::max(c.n_preds, c.n_gts);
    for (int i = 0; i < k; ++i) count *= static_cast<double>(larger - i);
    if (count > 1e7) throw std::invalid_argument("brute_force_assign: instance too large");

    const bool gt_side = c.n_gts <= c.n_preds;  // enumerate maps from the smaller side
    const int small = k;
    const int large = larger;

    std::vector<int> pick(small, -1);
    std::vector<char> used(large, 0);
    std::vector<std::pair<int, int>> pairs(small);
    bool have_best = false;

    auto consider = [&]() {
        for (int i = 0; i < small; ++i)
            pairs[i] = gt_side ? std::make_pair(pick[i], i) : std::make_pair(i, pick[i]);
        std::sort(pairs.begin(), pairs.end());
        const double total = direct_sum(c, pairs);
        if (!have_best || total < best.total_cost ||
            (total == best.total_cost && pairs < best.pairs)) {
            best.pairs = pairs;
            best.total_cost = total;
            have_best = true;
        }
    };

    // Depth-first enumeration of all injective maps small-side -> large-side.
    auto recurse = [&](auto&& self, int i) -> void {
        if (i == small) {
            consider();
            return;
        }
        for (int j = 0; j < large; ++j) {
            if (used[j]) continue;
            used[j] = 1;
            pick[i] = j;
            self(self, i + 1);
            used[j] = 0;
        }
    };
    recurse(recurse, 0);
    return best;
}

}  // namespace setdet
