#include "setdet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace setdet {

namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

int Tape::push(Node n) {
    n.needs_grad = n.op == Op::kParam || (n.a >= 0 && nodes_[n.a].needs_grad) ||
                   (n.b >= 0 && nodes_[n.b].needs_grad);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(Mat m) {
    Node n;
    n.op = Op::kConst;
    n.value = std::move(m);
    return push(std::move(n));
}

int Tape::param(const Mat* value, Mat* grad) {
    Node n;
    n.op = Op::kParam;
    n.ext_value = value;
    n.ext_grad = grad;
    n.value = *value;  // snapshot; params do not change during one graph's life
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    if (va.cols != vb.rows) throw std::invalid_argument("matmul: inner dimensions differ");
    Node n;
    n.op = Op::kMatMul;
    n.a = a;
    n.b = b;
    n.value = Mat(va.rows, vb.cols);
    Mat::matmul_acc(va, vb, n.value);
    return push(std::move(n));
}

int Tape::matmul_nt(int a, int b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    if (va.cols != vb.cols) throw std::invalid_argument("matmul_nt: inner dimensions differ");
    Node n;
    n.op = Op::kMatMulNT;
    n.a = a;
    n.b = b;
    n.value = Mat(va.rows, vb.rows);
    Mat::matmul_nt_acc(va, vb, n.value);
    return push(std::move(n));
}

#define SETDET_BINARY_ELEMENTWISE(NAME, OP_TAG, EXPR)                       \
    int Tape::NAME(int a, int b) {                                         \
        const Mat& va = value(a);                                          \
        const Mat& vb = value(b);                                          \
        check_same_shape(va, vb, #NAME);                                   \
        Node n;                                                            \
        n.op = OP_TAG;                                                     \
        n.a = a;                                                           \
        n.b = b;                                                           \
        n.value = Mat(va.rows, va.cols);                                   \
        for (size_t i = 0; i < va.size(); ++i) {                           \
            const double x = va.d[i], y = vb.d[i];                         \
            n.value.d[i] = (EXPR);                                         \
        }                                                                   \
        return push(std::move(n));                                         \
    }

SETDET_BINARY_ELEMENTWISE(add, Op::kAdd, x + y)
SETDET_BINARY_ELEMENTWISE(sub, Op::kSub, x - y)
SETDET_BINARY_ELEMENTWISE(mul, Op::kMul, x * y)
SETDET_BINARY_ELEMENTWISE(divide, Op::kDivide, x / y)
SETDET_BINARY_ELEMENTWISE(maximum, Op::kMax, x >= y ? x : y)
SETDET_BINARY_ELEMENTWISE(minimum, Op::kMin, x <= y ? x : y)

#undef SETDET_BINARY_ELEMENTWISE

int Tape::scale(int a, double c) {
    Node n;
    n.op = Op::kScale;
    n.a = a;
    n.c = c;
    const Mat& va = value(a);
    n.value = Mat(va.rows, va.cols);
    for (size_t i = 0; i < va.size(); ++i) n.value.d[i] = va.d[i] * c;
    return push(std::move(n));
}

int Tape::add_const(int a, double c) {
    Node n;
    n.op = Op::kAddConst;
    n.a = a;
    n.c = c;
    const Mat& va = value(a);
    n.value = Mat(va.rows, va.cols);
    for (size_t i = 0; i < va.size(); ++i) n.value.d[i] = va.d[i] + c;
    return push(std::move(n));
}

int Tape::add_rowvec(int a, int v) {
    const Mat& va = value(a);
    const Mat& vv = value(v);
    if (vv.rows != 1 || vv.cols != va.cols)
        throw std::invalid_argument("add_rowvec: vector shape mismatch");
    Node n;
    n.op = Op::kAddRowVec;
    n.a = a;
    n.b = v;
    n.value = Mat(va.rows, va.cols);
    for (int r = 0; r < va.rows; ++r)
        for (int c = 0; c < va.cols; ++c) n.value.at(r, c) = va.at(r, c) + vv.d[c];
    return push(std::move(n));
}

int Tape::mul_rowvec(int a, int v) {
    const Mat& va = value(a);
    const Mat& vv = value(v);
    if (vv.rows != 1 || vv.cols != va.cols)
        throw std::invalid_argument("mul_rowvec: vector shape mismatch");
    Node n;
    n.op = Op::kMulRowVec;
    n.a = a;
    n.b = v;
    n.value = Mat(va.rows, va.cols);
    for (int r = 0; r < va.rows; ++r)
        for (int c = 0; c < va.cols; ++c) n.value.at(r, c) = va.at(r, c) * vv.d[c];
    return push(std::move(n));
}

#define SETDET_UNARY_ELEMENTWISE(NAME, OP_TAG, EXPR)  \
    int Tape::NAME(int a) {                           \
        Node n;                                       \
        n.op = OP_TAG;                                \
        n.a = a;                                      \
        const Mat& va = value(a);                     \
        n.value = Mat(va.rows, va.cols);              \
        for (size_t i = 0; i < va.size(); ++i) {      \
            const double x = va.d[i];                 \
            n.value.d[i] = (EXPR);                    \
        }                                             \
        return push(std::move(n));                    \
    }

SETDET_UNARY_ELEMENTWISE(relu, Op::kRelu, x > 0.0 ? x : 0.0)
SETDET_UNARY_ELEMENTWISE(sigmoid, Op::kSigmoid, 1.0 / (1.0 + std::exp(-x)))
// softplus(x) = log(1 + e^x), computed stably for large |x|
SETDET_UNARY_ELEMENTWISE(softplus, Op::kSoftplus,
                         x > 30.0 ? x : (x < -30.0 ? std::exp(x) : std::log1p(std::exp(x))))
SETDET_UNARY_ELEMENTWISE(abs, Op::kAbs, std::abs(x))
SETDET_UNARY_ELEMENTWISE(sin, Op::kSin, std::sin(x))
SETDET_UNARY_ELEMENTWISE(cos, Op::kCos, std::cos(x))

#undef SETDET_UNARY_ELEMENTWISE

int Tape::pow_const(int a, double c) {
    Node n;
    n.op = Op::kPow;
    n.a = a;
    n.c = c;
    const Mat& va = value(a);
    n.value = Mat(va.rows, va.cols);
    for (size_t i = 0; i < va.size(); ++i) n.value.d[i] = std::pow(va.d[i], c);
    return push(std::move(n));
}

int Tape::sum_all(int a) {
    Node n;
    n.op = Op::kSumAll;
    n.a = a;
    n.value = Mat(1, 1);
    double s = 0.0;
    for (double v : value(a).d) s += v;
    n.value.d[0] = s;
    return push(std::move(n));
}

int Tape::slice_rows(int a, int r0, int r1) {
    const Mat& va = value(a);
    if (r0 < 0 || r1 > va.rows || r0 > r1) throw std::invalid_argument("slice_rows: bad range");
    Node n;
    n.op = Op::kSliceRows;
    n.a = a;
    n.r0 = r0;
    n.r1 = r1;
    n.value = Mat(r1 - r0, va.cols);
    for (int r = r0; r < r1; ++r)
        for (int c = 0; c < va.cols; ++c) n.value.at(r - r0, c) = va.at(r, c);
    return push(std::move(n));
}

int Tape::slice_cols(int a, int c0, int c1) {
    const Mat& va = value(a);
    if (c0 < 0 || c1 > va.cols || c0 > c1) throw std::invalid_argument("slice_cols: bad range");
    Node n;
    n.op = Op::kSliceCols;
    n.a = a;
    n.r0 = c0;
    n.r1 = c1;
    n.value = Mat(va.rows, c1 - c0);
    for (int r = 0; r < va.rows; ++r)
        for (int c = c0; c < c1; ++c) n.value.at(r, c - c0) = va.at(r, c);
    return push(std::move(n));
}

int Tape::concat_rows(int a, int b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    if (va.cols != vb.cols) throw std::invalid_argument("concat_rows: column count differs");
    Node n;
    n.op = Op::kConcatRows;
    n.a = a;
    n.b = b;
    n.value = Mat(va.rows + vb.rows, va.cols);
    std::copy(va.d.begin(), va.d.end(), n.value.d.begin());
    std::copy(vb.d.begin(), vb.d.end(), n.value.d.begin() + va.size());
    return push(std::move(n));
}

int Tape::concat_cols(int a, int b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    if (va.rows != vb.rows) throw std::invalid_argument("concat_cols: row count differs");
    Node n;
    n.op = Op::kConcatCols;
    n.a = a;
    n.b = b;
    n.value = Mat(va.rows, va.cols + vb.cols);
    for (int r = 0; r < va.rows; ++r) {
        for (int c = 0; c < va.cols; ++c) n.value.at(r, c) = va.at(r, c);
        for (int c = 0; c < vb.cols; ++c) n.value.at(r, va.cols + c) = vb.at(r, c);
    }
    return push(std::move(n));
}

int Tape::gather_rows(int a, std::vector<int> idx) {
    const Mat& va = value(a);
    for (int i : idx)
        if (i < 0 || i >= va.rows) throw std::invalid_argument("gather_rows: index out of range");
    Node n;
    n.op = Op::kGatherRows;
    n.a = a;
    n.value = Mat(static_cast<int>(idx.size()), va.cols);
    for (size_t r = 0; r < idx.size(); ++r)
        for (int c = 0; c < va.cols; ++c) n.value.at(static_cast<int>(r), c) = va.at(idx[r], c);
    n.idx = std::move(idx);
    return push(std::move(n));
}

int Tape::softmax_masked_rows(int a, const AttentionMask* mask) {
    const Mat& va = value(a);
    if (mask && (mask->width != va.rows || mask->width != va.cols))
        throw std::invalid_argument("softmax_masked_rows: mask dimensions differ from scores");
    Node n;
    n.op = Op::kSoftmaxMasked;
    n.a = a;
    n.mask = mask;
    n.value = Mat(va.rows, va.cols);
    for (int r = 0; r < va.rows; ++r) {
        // max over unmasked entries only, so blocked columns cannot influence
        // the row even through the stabilizer
        double mx = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < va.cols; ++c)
            if (!mask || !mask->at(r, c)) mx = std::max(mx, va.at(r, c));
        if (mx == -std::numeric_limits<double>::infinity()) continue;  // fully blocked row -> zeros
        double denom = 0.0;
        for (int c = 0; c < va.cols; ++c) {
            if (mask && mask->at(r, c)) continue;
            const double e = std::exp(va.at(r, c) - mx);
            n.value.at(r, c) = e;
            denom += e;
        }
        for (int c = 0; c < va.cols; ++c) n.value.at(r, c) /= denom;
    }
    return push(std::move(n));
}

int Tape::layer_norm_rows(int a, double eps) {
    const Mat& va = value(a);
    Node n;
    n.op = Op::kLayerNorm;
    n.a = a;
    n.c = eps;
    n.value = Mat(va.rows, va.cols);
    n.aux = Mat(va.rows, 1);  // 1/sqrt(var + eps) per row
    const int cols = va.cols;
    for (int r = 0; r < va.rows; ++r) {
        double mean = 0.0;
        for (int c = 0; c < cols; ++c) mean += va.at(r, c);
        mean /= cols;
        double var = 0.0;
        for (int c = 0; c < cols; ++c) {
            const double d = va.at(r, c) - mean;
            var += d * d;
        }
        var /= cols;
        const double inv = 1.0 / std::sqrt(var + eps);
        n.aux.d[r] = inv;
        for (int c = 0; c < cols; ++c) n.value.at(r, c) = (va.at(r, c) - mean) * inv;
    }
    return push(std::move(n));
}

namespace {

double stable_softplus(double x) {
    return x > 30.0 ? x : (x < -30.0 ? std::exp(x) : std::log1p(std::exp(x)));
}

// corner geometry shared by the fused GIoU forward and backward
struct GiouCells {
    double px0, py0, px1, py1, tx0, ty0, tx1, ty1;
    double iw_raw, ih_raw, iw, ih, inter, area_p, area_t, uni, ew, eh, enclosing;
};

GiouCells giou_cells(const double* p, const double* t) {
    GiouCells c;
    c.px0 = p[0] - p[2] * 0.5;
    c.py0 = p[1] - p[3] * 0.5;
    c.px1 = p[0] + p[2] * 0.5;
    c.py1 = p[1] + p[3] * 0.5;
    c.tx0 = t[0] - t[2] * 0.5;
    c.ty0 = t[1] - t[3] * 0.5;
    c.tx1 = t[0] + t[2] * 0.5;
    c.ty1 = t[1] + t[3] * 0.5;
    c.iw_raw = std::min(c.px1, c.tx1) - std::max(c.px0, c.tx0);
    c.ih_raw = std::min(c.py1, c.ty1) - std::max(c.py0, c.ty0);
    c.iw = std::max(c.iw_raw, 0.0);
    c.ih = std::max(c.ih_raw, 0.0);
    c.inter = c.iw * c.ih;
    c.area_p = (c.px1 - c.px0) * (c.py1 - c.py0);
    c.area_t = (c.tx1 - c.tx0) * (c.ty1 - c.ty0);
    c.uni = c.area_p + c.area_t - c.inter;
    c.ew = std::max(c.px1, c.tx1) - std::min(c.px0, c.tx0);
    c.eh = std::max(c.py1, c.ty1) - std::min(c.py0, c.ty0);
    c.enclosing = c.ew * c.eh;
    return c;
}

}  // namespace

int Tape::focal_bce_sum(int logits, Mat targets01, double alpha, double gamma) {
    const Mat& z = value(logits);
    if (!z.same_shape(targets01))
        throw std::invalid_argument("focal_bce_sum: target shape mismatch");
    Node n;
    n.op = Op::kFocalSum;
    n.a = logits;
    n.c = alpha;
    n.c2 = gamma;
    n.value = Mat(1, 1);
    double s = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-z.d[i]));
        if (targets01.d[i] > 0.5)
            s += alpha * std::pow(1.0 - p, gamma) * stable_softplus(-z.d[i]);
        else
            s += (1.0 - alpha) * std::pow(p, gamma) * stable_softplus(z.d[i]);
    }
    n.value.d[0] = s;
    n.aux = std::move(targets01);
    return push(std::move(n));
}

int Tape::l1_sum(int a, Mat targets) {
    const Mat& x = value(a);
    if (!x.same_shape(targets)) throw std::invalid_argument("l1_sum: target shape mismatch");
    Node n;
    n.op = Op::kL1Sum;
    n.a = a;
    n.value = Mat(1, 1);
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += std::abs(x.d[i] - targets.d[i]);
    n.value.d[0] = s;
    n.aux = std::move(targets);
    return push(std::move(n));
}

int Tape::giou_pairs(int pred_boxes, Mat target_boxes) {
    const Mat& p = value(pred_boxes);
    if (p.cols != 4 || !p.same_shape(target_boxes))
        throw std::invalid_argument("giou_pairs: boxes must be matching K x 4");
    Node n;
    n.op = Op::kGiouPairs;
    n.a = pred_boxes;
    n.value = Mat(p.rows, 1);
    for (int r = 0; r < p.rows; ++r) {
        const GiouCells c = giou_cells(p.row(r), target_boxes.row(r));
        n.value.d[r] = c.inter / c.uni - (c.enclosing - c.uni) / c.enclosing;
    }
    n.aux = std::move(target_boxes);
    return push(std::move(n));
}

void Tape::backward(int loss, double seed) {
    if (value(loss).rows != 1 || value(loss).cols != 1)
        throw std::invalid_argument("backward: loss must be a scalar node");
    for (Node& n : nodes_) {
        if (n.needs_grad)
            n.grad = Mat(n.value.rows, n.value.cols);
        else
            n.grad = Mat();
    }
    if (!nodes_[loss].needs_grad) return;  // loss does not depend on any parameter
    nodes_[loss].grad.d[0] = seed;

    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.needs_grad) continue;
        const Mat& g = n.grad;
        const bool need_a = n.a >= 0 && nodes_[n.a].needs_grad;
        const bool need_b = n.b >= 0 && nodes_[n.b].needs_grad;
        switch (n.op) {
            case Op::kConst:
                break;
            case Op::kParam:
                if (n.ext_grad) {
                    for (size_t i = 0; i < g.size(); ++i) n.ext_grad->d[i] += g.d[i];
                }
                break;
            case Op::kMatMul:
                if (need_a) Mat::matmul_nt_acc(g, nodes_[n.b].value, nodes_[n.a].grad);
                if (need_b) Mat::matmul_tn_acc(nodes_[n.a].value, g, nodes_[n.b].grad);
                break;
            case Op::kMatMulNT:
                if (need_a) Mat::matmul_acc(g, nodes_[n.b].value, nodes_[n.a].grad);
                if (need_b) Mat::matmul_tn_acc(g, nodes_[n.a].value, nodes_[n.b].grad);
                break;
            case Op::kAdd:
                for (size_t i = 0; i < g.size(); ++i) {
                    if (need_a) nodes_[n.a].grad.d[i] += g.d[i];
                    if (need_b) nodes_[n.b].grad.d[i] += g.d[i];
                }
                break;
            case Op::kSub:
                for (size_t i = 0; i < g.size(); ++i) {
                    if (need_a) nodes_[n.a].grad.d[i] += g.d[i];
                    if (need_b) nodes_[n.b].grad.d[i] -= g.d[i];
                }
                break;
            case Op::kMul:
                for (size_t i = 0; i < g.size(); ++i) {
                    if (need_a) nodes_[n.a].grad.d[i] += g.d[i] * nodes_[n.b].value.d[i];
                    if (need_b) nodes_[n.b].grad.d[i] += g.d[i] * nodes_[n.a].value.d[i];
                }
                break;
            case Op::kDivide:
                for (size_t i = 0; i < g.size(); ++i) {
                    const double bi = nodes_[n.b].value.d[i];
                    if (need_a) nodes_[n.a].grad.d[i] += g.d[i] / bi;
                    if (need_b) nodes_[n.b].grad.d[i] -= g.d[i] * n.value.d[i] / bi;
                }
                break;
            case Op::kMax:
                for (size_t i = 0; i < g.size(); ++i) {
                    if (nodes_[n.a].value.d[i] >= nodes_[n.b].value.d[i]) {
                        if (need_a) nodes_[n.a].grad.d[i] += g.d[i];
                    } else if (need_b) {
                        nodes_[n.b].grad.d[i] += g.d[i];
                    }
                }
                break;
            case Op::kMin:
                for (size_t i = 0; i < g.size(); ++i) {
                    if (nodes_[n.a].value.d[i] <= nodes_[n.b].value.d[i]) {
                        if (need_a) nodes_[n.a].grad.d[i] += g.d[i];
                    } else if (need_b) {
                        nodes_[n.b].grad.d[i] += g.d[i];
                    }
                }
                break;
            case Op::kScale:
                for (size_t i = 0; i < g.size(); ++i) nodes_[n.a].grad.d[i] += g.d[i] * n.c;
                break;
            case Op::kAddConst:
                for (size_t i = 0; i < g.size(); ++i) nodes_[n.a].grad.d[i] += g.d[i];
                break;
            case Op::kAddRowVec:
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c) {
                        if (need_a) nodes_[n.a].grad.at(r, c) += g.at(r, c);
                        if (need_b) nodes_[n.b].grad.d[c] += g.at(r, c);
                    }
                break;
            case Op::kMulRowVec:
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c) {
                        if (need_a) nodes_[n.a].grad.at(r, c) += g.at(r, c) * nodes_[n.b].value.d[c];
                        if (need_b) nodes_[n.b].grad.d[c] += g.at(r, c) * nodes_[n.a].value.at(r, c);
                    }
                break;
            case Op::kRelu:
                for (size_t i = 0; i < g.size(); ++i)
                    if (nodes_[n.a].value.d[i] > 0.0) nodes_[n.a].grad.d[i] += g.d[i];
                break;
            case Op::kSigmoid:
                for (size_t i = 0; i < g.size(); ++i) {
                    const double s = n.value.d[i];
                    nodes_[n.a].grad.d[i] += g.d[i] * s * (1.0 - s);
                }
                break;
            case Op::kSoftplus:
                for (size_t i = 0; i < g.size(); ++i) {
                    const double x = nodes_[n.a].value.d[i];
                    nodes_[n.a].grad.d[i] += g.d[i] / (1.0 + std::exp(-x));
                }
                break;
            case Op::kAbs:
                for (size_t i = 0; i < g.size(); ++i) {
                    const double x = nodes_[n.a].value.d[i];
                    nodes_[n.a].grad.d[i] += x > 0.0 ? g.d[i] : (x < 0.0 ? -g.d[i] : 0.0);
                }
                break;
            case Op::kSin:
                for (size_t i = 0; i < g.size(); ++i)
                    nodes_[n.a].grad.d[i] += g.d[i] * std::cos(nodes_[n.a].value.d[i]);
                break;
            case Op::kCos:
                for (size_t i = 0; i < g.size(); ++i)
                    nodes_[n.a].grad.d[i] -= g.d[i] * std::sin(nodes_[n.a].value.d[i]);
                break;
            case Op::kPow:
                for (size_t i = 0; i < g.size(); ++i) {
                    const double x = nodes_[n.a].value.d[i];
                    nodes_[n.a].grad.d[i] += g.d[i] * n.c * std::pow(x, n.c - 1.0);
                }
                break;
            case Op::kSumAll:
                for (size_t i = 0; i < nodes_[n.a].grad.size(); ++i)
                    nodes_[n.a].grad.d[i] += g.d[0];
                break;
            case Op::kSliceRows:
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c) nodes_[n.a].grad.at(n.r0 + r, c) += g.at(r, c);
                break;
            case Op::kSliceCols:
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c) nodes_[n.a].grad.at(r, n.r0 + c) += g.at(r, c);
                break;
            case Op::kConcatRows: {
                const size_t na = nodes_[n.a].value.size();
                if (need_a)
                    for (size_t i = 0; i < na; ++i) nodes_[n.a].grad.d[i] += g.d[i];
                if (need_b)
                    for (size_t i = 0; i < nodes_[n.b].value.size(); ++i)
                        nodes_[n.b].grad.d[i] += g.d[na + i];
                break;
            }
            case Op::kConcatCols: {
                const int ca = nodes_[n.a].value.cols;
                for (int r = 0; r < g.rows; ++r) {
                    if (need_a)
                        for (int c = 0; c < ca; ++c) nodes_[n.a].grad.at(r, c) += g.at(r, c);
                    if (need_b)
                        for (int c = 0; c < nodes_[n.b].value.cols; ++c)
                            nodes_[n.b].grad.at(r, c) += g.at(r, ca + c);
                }
                break;
            }
            case Op::kGatherRows:
                for (size_t r = 0; r < n.idx.size(); ++r)
                    for (int c = 0; c < g.cols; ++c)
                        nodes_[n.a].grad.at(n.idx[r], c) += g.at(static_cast<int>(r), c);
                break;
            case Op::kSoftmaxMasked:
                for (int r = 0; r < g.rows; ++r) {
                    double dot = 0.0;
                    for (int c = 0; c < g.cols; ++c) dot += g.at(r, c) * n.value.at(r, c);
                    for (int c = 0; c < g.cols; ++c) {
                        if (n.mask && n.mask->at(r, c)) continue;
                        nodes_[n.a].grad.at(r, c) += n.value.at(r, c) * (g.at(r, c) - dot);
                    }
                }
                break;
            case Op::kLayerNorm: {
                const int cols = g.cols;
                for (int r = 0; r < g.rows; ++r) {
                    const double inv = n.aux.d[r];
                    double mean_g = 0.0, mean_gy = 0.0;
                    for (int c = 0; c < cols; ++c) {
                        mean_g += g.at(r, c);
                        mean_gy += g.at(r, c) * n.value.at(r, c);
                    }
                    mean_g /= cols;
                    mean_gy /= cols;
                    for (int c = 0; c < cols; ++c)
                        nodes_[n.a].grad.at(r, c) +=
                            inv * (g.at(r, c) - mean_g - n.value.at(r, c) * mean_gy);
                }
                break;
            }
            case Op::kFocalSum: {
                const double gv = g.d[0];
                const double alpha = n.c, gamma = n.c2;
                const Mat& z = nodes_[n.a].value;
                for (size_t i = 0; i < z.size(); ++i) {
                    const double p = 1.0 / (1.0 + std::exp(-z.d[i]));
                    double dz;
                    if (n.aux.d[i] > 0.5) {
                        // d/dz of a*(1-p)^g*softplus(-z)
                        dz = -alpha * std::pow(1.0 - p, gamma) *
                             (gamma * p * stable_softplus(-z.d[i]) + (1.0 - p));
                    } else {
                        dz = (1.0 - alpha) * std::pow(p, gamma) *
                             (gamma * (1.0 - p) * stable_softplus(z.d[i]) + p);
                    }
                    nodes_[n.a].grad.d[i] += gv * dz;
                }
                break;
            }
            case Op::kL1Sum: {
                const double gv = g.d[0];
                const Mat& x = nodes_[n.a].value;
                for (size_t i = 0; i < x.size(); ++i) {
                    const double d = x.d[i] - n.aux.d[i];
                    nodes_[n.a].grad.d[i] += d > 0.0 ? gv : (d < 0.0 ? -gv : 0.0);
                }
                break;
            }
            case Op::kGiouPairs: {
                const Mat& p = nodes_[n.a].value;
                for (int r = 0; r < p.rows; ++r) {
                    const double gv = g.d[r];
                    if (gv == 0.0) continue;
                    const GiouCells c = giou_cells(p.row(r), n.aux.row(r));
                    // F = I/U - (E - U)/E with U = Ap + At - I
                    const double gI = gv * (1.0 / c.uni + c.inter / (c.uni * c.uni) -
                                            1.0 / c.enclosing);
                    const double gA = gv * (-c.inter / (c.uni * c.uni) + 1.0 / c.enclosing);
                    const double gE = gv * (-c.uni / (c.enclosing * c.enclosing));

                    // intersection terms; max/min tie rules mirror the
                    // elementwise primitives (first argument wins ties)
                    const double g_iw = gI * c.ih * (c.iw_raw >= 0.0 ? 1.0 : 0.0);
                    const double g_ih = gI * c.iw * (c.ih_raw >= 0.0 ? 1.0 : 0.0);
                    double g_px0 = -g_iw * (c.px0 >= c.tx0 ? 1.0 : 0.0);
                    double g_px1 = g_iw * (c.px1 <= c.tx1 ? 1.0 : 0.0);
                    double g_py0 = -g_ih * (c.py0 >= c.ty0 ? 1.0 : 0.0);
                    double g_py1 = g_ih * (c.py1 <= c.ty1 ? 1.0 : 0.0);

                    // own-area terms
                    const double pw = c.px1 - c.px0, ph = c.py1 - c.py0;
                    g_px0 -= gA * ph;
                    g_px1 += gA * ph;
                    g_py0 -= gA * pw;
                    g_py1 += gA * pw;

                    // enclosing-box terms
                    const double g_ew = gE * c.eh, g_eh = gE * c.ew;
                    g_px1 += g_ew * (c.px1 >= c.tx1 ? 1.0 : 0.0);
                    g_px0 -= g_ew * (c.px0 <= c.tx0 ? 1.0 : 0.0);
                    g_py1 += g_eh * (c.py1 >= c.ty1 ? 1.0 : 0.0);
                    g_py0 -= g_eh * (c.py0 <= c.ty0 ? 1.0 : 0.0);

                    double* out = nodes_[n.a].grad.row(r);
                    out[0] += g_px0 + g_px1;
                    out[1] += g_py0 + g_py1;
                    out[2] += (g_px1 - g_px0) * 0.5;
                    out[3] += (g_py1 - g_py0) * 0.5;
                }
                break;
            }
        }
    }
}

}  // namespace setdet
