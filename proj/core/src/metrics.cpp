#include "setdet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace setdet {

IndexVector index_vector(const Assignment& a, int n_preds) {
    IndexVector v(n_preds, -1);
    for (const auto& [n, m] : a.pairs) {
        if (n < 0 || n >= n_preds)
            throw std::invalid_argument("index_vector: prediction index out of range");
        v[n] = m;
    }
    return v;
}

int instability(const IndexVector& now, const IndexVector& prev) {
    if (now.size() != prev.size())
        throw std::invalid_argument("instability: index vector length mismatch");
    int changed = 0;
    for (size_t i = 0; i < now.size(); ++i)
        if (now[i] != prev[i]) ++changed;
    return changed;
}

double dataset_instability(const std::vector<IndexVector>& now,
                           const std::vector<IndexVector>& prev) {
    if (now.size() != prev.size())
        throw std::invalid_argument("dataset_instability: image sets differ");
    if (now.empty()) return 0.0;
    double total = 0.0;
    for (size_t i = 0; i < now.size(); ++i) total += instability(now[i], prev[i]);
    return total / static_cast<double>(now.size());
}

namespace {

// AP for one class from pooled, score-sorted detections.
double class_ap(const std::vector<Detection>& dets,
                const std::vector<std::vector<GtObject>>& gts_per_image, int label,
                double iou_threshold, int total_gt) {
    if (total_gt == 0) return dets.empty() ? 1.0 : 0.0;
    if (dets.empty()) return 0.0;

    std::vector<std::vector<char>> gt_used(gts_per_image.size());
    for (size_t i = 0; i < gts_per_image.size(); ++i)
        gt_used[i].assign(gts_per_image[i].size(), 0);

    std::vector<double> precision, recall;
    int tp = 0, fp = 0;
    for (const Detection& det : dets) {
        const auto& gts = gts_per_image[det.image_id];
        int best = -1;
        double best_iou = iou_threshold;
        for (size_t g = 0; g < gts.size(); ++g) {
            if (gts[g].label != label || gt_used[det.image_id][g]) continue;
            const double v = iou(det.box, gts[g].box);
            if (v >= best_iou) {
                best_iou = v;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0) {
            gt_used[det.image_id][best] = 1;
            ++tp;
        } else {
            ++fp;
        }
        precision.push_back(static_cast<double>(tp) / (tp + fp));
        recall.push_back(static_cast<double>(tp) / total_gt);
    }

    // All-point interpolation: area under the upper precision envelope.
    double ap = 0.0, prev_recall = 0.0;
    for (size_t k = 0; k < precision.size(); ++k) {
        double env = 0.0;
        for (size_t j = k; j < precision.size(); ++j) env = std::max(env, precision[j]);
        ap += (recall[k] - prev_recall) * env;
        prev_recall = recall[k];
    }
    return ap;
}

}  // namespace

double average_precision(const std::vector<Detection>& detections,
                         const std::vector<std::vector<GtObject>>& gts_per_image,
                         double iou_threshold) {
    for (const Detection& d : detections) {
        if (!std::isfinite(d.score)) throw std::invalid_argument("average_precision: non-finite score");
        if (d.image_id < 0 || d.image_id >= static_cast<int>(gts_per_image.size()))
            throw std::invalid_argument("average_precision: detection image_id out of range");
    }

    int max_label = -1;
    for (const auto& gts : gts_per_image)
        for (const auto& g : gts) max_label = std::max(max_label, g.label);
    for (const auto& d : detections) max_label = std::max(max_label, d.label);
    if (max_label < 0) return 1.0;  // no GTs and no predictions anywhere

    std::vector<std::vector<Detection>> by_class(max_label + 1);
    for (const Detection& d : detections) by_class[d.label].push_back(d);
    std::vector<int> gt_count(max_label + 1, 0);
    for (const auto& gts : gts_per_image)
        for (const auto& g : gts) ++gt_count[g.label];

    double ap_sum = 0.0;
    int classes = 0;
    for (int c = 0; c <= max_label; ++c) {
        if (gt_count[c] == 0 && by_class[c].empty()) continue;
        auto& dets = by_class[c];
        std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.image_id < b.image_id;
        });
        ap_sum += class_ap(dets, gts_per_image, c, iou_threshold, gt_count[c]);
        ++classes;
    }
    return ap_sum / classes;
}

double mean_average_precision(const std::vector<Detection>& detections,
                              const std::vector<std::vector<GtObject>>& gts_per_image,
                              const std::vector<double>& iou_thresholds) {
    if (iou_thresholds.empty()) throw std::invalid_argument("mean_average_precision: no thresholds");
    double s = 0.0;
    for (double t : iou_thresholds) s += average_precision(detections, gts_per_image, t);
    return s / static_cast<double>(iou_thresholds.size());
}

std::string EpochRecord::csv_header() {
    return "epoch,mean_IS,AP50,mean_ap,loss_cls,loss_l1,loss_giou,loss_dn_cls,loss_dn_l1,"
           "loss_dn_giou,lr";
}

std::string EpochRecord::csv_row() const {
    char buf[512];
    char is_field[64] = "";
    if (mean_is) std::snprintf(is_field, sizeof(is_field), "%.17g", *mean_is);
    std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                  epoch, is_field, ap50, mean_ap, loss_cls, loss_l1, loss_giou, loss_dn_cls,
                  loss_dn_l1, loss_dn_giou, lr);
    return buf;
}

}  // namespace setdet
