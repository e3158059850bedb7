// Minimal reverse-mode autodiff over dense double matrices. Nodes are
// evaluated eagerly at construction; backward() accumulates gradients for
// every reachable parameter by a reverse sweep over the tape.
#pragma once

#include <vector>

#include "setdet/denoising.hpp"
#include "setdet/mat.hpp"

namespace setdet {

class Tape {
  public:
    // Leaves. Params reference external storage so several graphs can
    // accumulate into the same gradient buffers.
    int constant(Mat m);
    int param(const Mat* value, Mat* grad);

    int matmul(int a, int b);     // a @ b
    int matmul_nt(int a, int b);  // a @ b^T

    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);  // elementwise
    int divide(int a, int b);
    int maximum(int a, int b);
    int minimum(int a, int b);

    int scale(int a, double c);
    int add_const(int a, double c);
    int add_rowvec(int a, int v);  // a (r x c) + broadcast v (1 x c)
    int mul_rowvec(int a, int v);

    int relu(int a);
    int sigmoid(int a);
    int softplus(int a);
    int abs(int a);
    int sin(int a);
    int cos(int a);
    int pow_const(int a, double c);  // elementwise x^c, requires x >= 0

    int sum_all(int a);  // 1x1
    int slice_rows(int a, int r0, int r1);
    int slice_cols(int a, int c0, int c1);
    int concat_rows(int a, int b);
    int concat_cols(int a, int b);
    int gather_rows(int a, std::vector<int> idx);

    // Row-wise softmax; positions with mask(i, j) == 1 get exactly zero
    // weight and do not influence the row at all. A fully blocked row yields
    // zeros. mask may be null (plain softmax) and must outlive the tape.
    int softmax_masked_rows(int a, const AttentionMask* mask);

    // Row-wise (x - mean) / sqrt(var + eps); affine scale/shift are composed
    // from mul_rowvec / add_rowvec outside.
    int layer_norm_rows(int a, double eps = 1e-5);

    // Fused loss kernels. Equivalent to compositions of the primitives above
    // but a single node each, which matters in the per-scene training graphs.

    // Sum over all entries of the focal term against constant 0/1 targets,
    // computed via softplus: t*a*(1-p)^g*softplus(-z) + (1-t)*(1-a)*p^g*softplus(z).
    int focal_bce_sum(int logits, Mat targets01, double alpha, double gamma);

    // Sum of |x - t| over all entries.
    int l1_sum(int a, Mat targets);

    // Row-paired GIoU of predicted cxcywh boxes against constant targets,
    // K x 1 output. Matches the geometry::giou arithmetic exactly.
    int giou_pairs(int pred_boxes, Mat target_boxes);

    const Mat& value(int id) const { return nodes_[id].value; }
    int rows(int id) const { return nodes_[id].value.rows; }
    int cols(int id) const { return nodes_[id].value.cols; }
    size_t node_count() const { return nodes_.size(); }

    // Reverse sweep from a scalar loss node. seed scales the whole gradient
    // (used for batch averaging). Accumulates into the external buffers of
    // every param leaf.
    void backward(int loss, double seed = 1.0);

  private:
    enum class Op {
        kConst, kParam, kMatMul, kMatMulNT, kAdd, kSub, kMul, kDivide, kMax, kMin,
        kScale, kAddConst, kAddRowVec, kMulRowVec, kRelu, kSigmoid, kSoftplus, kAbs,
        kSin, kCos, kPow, kSumAll, kSliceRows, kSliceCols, kConcatRows, kConcatCols,
        kGatherRows, kSoftmaxMasked, kLayerNorm, kFocalSum, kL1Sum, kGiouPairs,
    };

    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        Mat value;
        Mat grad;
        double c = 0.0;          // scalar for kScale/kAddConst/kPow, eps for kLayerNorm
        double c2 = 0.0;         // focal gamma
        int r0 = 0, r1 = 0;      // slice bounds
        std::vector<int> idx;    // gather indices
        const AttentionMask* mask = nullptr;
        const Mat* ext_value = nullptr;
        Mat* ext_grad = nullptr;
        Mat aux;            // op-specific data (layernorm stats, loss targets)
        bool needs_grad = false;  // reaches a param; others are skipped in backward
    };

    int push(Node n);
    Node& at(int id) { return nodes_[id]; }

    std::vector<Node> nodes_;
};

}  // namespace setdet
