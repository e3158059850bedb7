// Matching-instability metric and a simplified average-precision evaluator.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "setdet/matching.hpp"

namespace setdet {

// Entry n is m if prediction n matched GT m in a given epoch, -1 if unmatched.
using IndexVector = std::vector<int>;

IndexVector index_vector(const Assignment& a, int n_preds);

// Count of positions whose matched GT index changed between two epochs.
int instability(const IndexVector& now, const IndexVector& prev);

// Mean per-image instability across a validation set.
double dataset_instability(const std::vector<IndexVector>& now,
                           const std::vector<IndexVector>& prev);

// One scored detection; image_id ties detections back to their scene so GTs
// are only consumed within the right image.
struct Detection {
    int image_id = 0;
    int label = 0;
    double score = 0.0;
    Box box;
};

// All-point interpolated AP at one IoU threshold, averaged over classes.
// Detections are matched greedily in score order, each GT usable once.
double average_precision(const std::vector<Detection>& detections,
                         const std::vector<std::vector<GtObject>>& gts_per_image,
                         double iou_threshold);

// Mean of average_precision over several thresholds (an AP@[.5:.95]-style
// summary when given the 10-threshold COCO-like list).
double mean_average_precision(const std::vector<Detection>& detections,
                              const std::vector<std::vector<GtObject>>& gts_per_image,
                              const std::vector<double>& iou_thresholds);

// Per-epoch results. mean_is is empty for the first epoch (no prior matching
// to compare against).
struct EpochRecord {
    int epoch = 0;  // 1-based
    std::optional<double> mean_is;
    double ap50 = 0.0;
    double mean_ap = 0.0;
    double loss_cls = 0.0;
    double loss_l1 = 0.0;
    double loss_giou = 0.0;
    double loss_dn_cls = 0.0;
    double loss_dn_l1 = 0.0;
    double loss_dn_giou = 0.0;
    double lr = 0.0;

    static std::string csv_header();
    std::string csv_row() const;
};

}  // namespace setdet
