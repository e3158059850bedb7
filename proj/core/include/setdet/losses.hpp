// Focal classification loss, L1 + GIoU box losses, the Hungarian-matched loss
// for the matching part and the fixed-assignment reconstruction loss for the
// denoising part.
#pragma once

#include "setdet/autodiff.hpp"
#include "setdet/model.hpp"

namespace setdet {

struct LossConfig {
    MatchWeights match;      // cost-matrix weights (class term uses -p)
    double w_cls = 1.0;      // loss-side weights
    double w_l1 = 5.0;
    double w_giou = 2.0;
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;
};

// Per-component values accumulated over decoder layers. Components are
// unweighted; total applies the loss weights.
struct LossBreakdown {
    double cls = 0.0;
    double l1 = 0.0;
    double giou = 0.0;
    double dn_cls = 0.0;
    double dn_l1 = 0.0;
    double dn_giou = 0.0;
    double total = 0.0;

    LossBreakdown& operator+=(const LossBreakdown& o);
};

// Scalar focal term for one outcome probability: -alpha*(1-p)^gamma*log(p),
// with p clamped away from 0.
double focal_loss(double p_t, double alpha, double gamma_f);

// (|pred - target|_1 in cxcywh, 1 - GIoU).
std::pair<double, double> box_losses(const Box& pred, const Box& target);

// GIoU of row-paired boxes as a K x 1 graph node (pred differentiable,
// targets constant).
int giou_pairs_node(Tape& tape, int pred_boxes, const std::vector<Box>& targets);

// Sum over all entries of the focal loss against a constant 0/1 target
// matrix, computed via softplus so it stays finite for any logit.
int focal_sum_node(Tape& tape, int logits, const Mat& targets01, double alpha, double gamma_f);

// Builds the training loss for one scene over every decoder layer: Hungarian
// loss on the matching part plus (when present) the reconstruction loss on
// the denoising part. Returns the scalar total node; breakdown receives the
// per-component values.
int total_loss_node(Tape& tape, const DecoderOutput& out, const QueryBatch& batch,
                    const LossConfig& cfg, LossBreakdown* breakdown);

}  // namespace setdet
