#include "setdet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace setdet {

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
    cls += o.cls;
    l1 += o.l1;
    giou += o.giou;
    dn_cls += o.dn_cls;
    dn_l1 += o.dn_l1;
    dn_giou += o.dn_giou;
    total += o.total;
    return *this;
}

double focal_loss(double p_t, double alpha, double gamma_f) {
    const double p = std::max(p_t, 1e-8);
    return -alpha * std::pow(1.0 - p, gamma_f) * std::log(p);
}

std::pair<double, double> box_losses(const Box& pred, const Box& target) {
    const double l1 = std::abs(pred.cx - target.cx) + std::abs(pred.cy - target.cy) +
                      std::abs(pred.w - target.w) + std::abs(pred.h - target.h);
    return {l1, 1.0 - giou(pred, target)};
}

namespace {

Mat boxes_to_mat(const std::vector<Box>& boxes) {
    Mat m(static_cast<int>(boxes.size()), 4);
    for (size_t i = 0; i < boxes.size(); ++i) {
        m.at(static_cast<int>(i), 0) = boxes[i].cx;
        m.at(static_cast<int>(i), 1) = boxes[i].cy;
        m.at(static_cast<int>(i), 2) = boxes[i].w;
        m.at(static_cast<int>(i), 3) = boxes[i].h;
    }
    return m;
}

}  // namespace

int giou_pairs_node(Tape& t, int pred_boxes, const std::vector<Box>& targets) {
    if (t.rows(pred_boxes) != static_cast<int>(targets.size()) || t.cols(pred_boxes) != 4)
        throw std::invalid_argument("giou_pairs_node: prediction/target count mismatch");
    return t.giou_pairs(pred_boxes, boxes_to_mat(targets));
}

int focal_sum_node(Tape& t, int logits, const Mat& targets01, double alpha, double gamma_f) {
    return t.focal_bce_sum(logits, targets01, alpha, gamma_f);
}

namespace {

// Hungarian loss for one decoder layer's matching part.
LossBreakdown hungarian_layer(Tape& t, int logits, int boxes, const QueryBatch& batch,
                              const LossConfig& cfg, int& node_out) {
    const int dn = batch.denoising_count();
    const int w = t.rows(logits);
    const int n = batch.matching_count;
    const int classes = batch.class_count;
    const int m_logits = t.slice_rows(logits, dn, w);
    const int m_boxes = t.slice_rows(boxes, dn, w);
    const auto& gts = batch.gt_objects;
    const int m = static_cast<int>(gts.size());
    const double norm = 1.0 / std::max(m, 1);

    // the assignment is computed from values; no gradient flows through it
    Assignment assignment;
    if (m > 0) {
        const Mat& probs_logits = t.value(m_logits);
        Mat probs(n, classes);
        for (size_t i = 0; i < probs.size(); ++i)
            probs.d[i] = 1.0 / (1.0 + std::exp(-probs_logits.d[i]));
        std::vector<Box> pred_boxes(n);
        const Mat& bv = t.value(m_boxes);
        for (int i = 0; i < n; ++i)
            pred_boxes[i] = {bv.at(i, 0), bv.at(i, 1), bv.at(i, 2), bv.at(i, 3)};
        assignment = hungarian_assign(build_cost_matrix(probs, pred_boxes, gts, cfg.match));
    }

    Mat targets(n, classes);
    for (const auto& [pn, pm] : assignment.pairs) targets.at(pn, gts[pm].label) = 1.0;
    const int cls_node =
        t.scale(focal_sum_node(t, m_logits, targets, cfg.focal_alpha, cfg.focal_gamma), norm);

    LossBreakdown b;
    int total;
    if (m > 0) {
        std::vector<int> rows;
        std::vector<Box> matched_gt;
        for (const auto& [pn, pm] : assignment.pairs) {
            rows.push_back(pn);
            matched_gt.push_back(gts[pm].box);
        }
        const int picked = t.gather_rows(m_boxes, rows);
        Mat target_mat = boxes_to_mat(matched_gt);
        const int l1_node =
            t.scale(t.l1_sum(picked, std::move(target_mat)), norm);
        const int giou_vals = giou_pairs_node(t, picked, matched_gt);
        const int giou_node =
            t.scale(t.sum_all(t.add_const(t.scale(giou_vals, -1.0), 1.0)), norm);
        b.cls = t.value(cls_node).d[0];
        b.l1 = t.value(l1_node).d[0];
        b.giou = t.value(giou_node).d[0];
        total = t.add(t.scale(cls_node, cfg.w_cls),
                      t.add(t.scale(l1_node, cfg.w_l1), t.scale(giou_node, cfg.w_giou)));
    } else {
        b.cls = t.value(cls_node).d[0];
        total = t.scale(cls_node, cfg.w_cls);
    }
    b.total = t.value(total).d[0];
    node_out = total;
    return b;
}

// Reconstruction loss for one decoder layer's denoising part: no matching,
// query (p, m) is supervised by GT object m directly.
LossBreakdown denoising_layer(Tape& t, int logits, int boxes, const QueryBatch& batch,
                              const LossConfig& cfg, int& node_out) {
    const int dn = batch.denoising_count();
    const int classes = batch.class_count;
    const double norm = 1.0 / dn;
    const int d_logits = t.slice_rows(logits, 0, dn);
    const int d_boxes = t.slice_rows(boxes, 0, dn);

    // targets are the ORIGINAL labels and boxes, even for flipped queries
    Mat targets(dn, classes);
    std::vector<Box> target_boxes(dn);
    for (int i = 0; i < dn; ++i) {
        const GtObject& gt = batch.gt_objects[batch.denoising[i].target];
        targets.at(i, gt.label) = 1.0;
        target_boxes[i] = gt.box;
    }

    const int cls_node =
        t.scale(focal_sum_node(t, d_logits, targets, cfg.focal_alpha, cfg.focal_gamma), norm);
    const int l1_node =
        t.scale(t.l1_sum(d_boxes, boxes_to_mat(target_boxes)), norm);
    const int giou_vals = giou_pairs_node(t, d_boxes, target_boxes);
    const int giou_node = t.scale(t.sum_all(t.add_const(t.scale(giou_vals, -1.0), 1.0)), norm);

    LossBreakdown b;
    b.dn_cls = t.value(cls_node).d[0];
    b.dn_l1 = t.value(l1_node).d[0];
    b.dn_giou = t.value(giou_node).d[0];
    node_out = t.add(t.scale(cls_node, cfg.w_cls),
                     t.add(t.scale(l1_node, cfg.w_l1), t.scale(giou_node, cfg.w_giou)));
    b.total = t.value(node_out).d[0];
    return b;
}

}  // namespace

int total_loss_node(Tape& t, const DecoderOutput& out, const QueryBatch& batch,
                    const LossConfig& cfg, LossBreakdown* breakdown) {
    LossBreakdown acc;
    int total = -1;
    for (size_t l = 0; l < out.layer_logits.size(); ++l) {
        int node;
        acc += hungarian_layer(t, out.layer_logits[l], out.layer_boxes[l], batch, cfg, node);
        total = total < 0 ? node : t.add(total, node);
        if (batch.denoising_count() > 0) {
            acc += denoising_layer(t, out.layer_logits[l], out.layer_boxes[l], batch, cfg, node);
            total = t.add(total, node);
        }
    }
    if (breakdown) *breakdown = acc;
    return total;
}

}  // namespace setdet
