// Cost-matrix construction and exact optimal bipartite assignment between
// predictions and ground-truth objects, plus an exhaustive oracle for tests.
#pragma once

#include <utility>
#include <vector>

#include "setdet/geometry.hpp"
#include "setdet/mat.hpp"

namespace setdet {

struct GtObject {
    Box box;
    int label = 0;
};

// N x M matrix of pairwise matching costs; row = prediction, column = GT.
struct CostMatrix {
    int n_preds = 0;
    int n_gts = 0;
    std::vector<double> values;  // row-major

    double at(int n, int m) const { return values[static_cast<size_t>(n) * n_gts + m]; }
    double& at(int n, int m) { return values[static_cast<size_t>(n) * n_gts + m]; }
};

// Partial injection between predictions and GTs: every GT matched when
// N >= M, every prediction used at most once. Pairs are kept sorted by
// prediction index.
struct Assignment {
    std::vector<std::pair<int, int>> pairs;  // (prediction n, gt m)
    double total_cost = 0.0;
};

struct MatchWeights {
    double cls = 2.0;
    double l1 = 5.0;
    double giou = 2.0;
};

// C[n][m] = cls * (-p_n(c_m)) + l1 * |b_n - b_m|_1 + giou * (-GIoU(b_n, b_m)).
// class_probs is N x C, pred_boxes has N entries. Throws std::invalid_argument
// on dimension mismatch.
CostMatrix build_cost_matrix(const Mat& class_probs, const std::vector<Box>& pred_boxes,
                             const std::vector<GtObject>& gts, const MatchWeights& weights);

// Exact minimum-cost assignment. Among equal-cost optima the lexicographically
// smallest pair list wins, which keeps downstream instability measurements
// deterministic. Throws std::invalid_argument on non-finite entries.
Assignment hungarian_assign(const CostMatrix& c);

// Exhaustive enumeration over all injective GT->prediction maps with the same
// tie-breaking rule. Refuses instances with min(N, M) > 8 or more than ~10M
// candidate maps.
Assignment brute_force_assign(const CostMatrix& c);

}  // namespace setdet
