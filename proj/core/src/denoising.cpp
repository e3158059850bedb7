#include "setdet/denoising.hpp"

#include <algorithm>
#include <stdexcept>

namespace setdet {

bool AttentionMask::any() const {
    return std::any_of(blocked.begin(), blocked.end(), [](char c) { return c != 0; });
}

std::vector<int> flip_labels(const std::vector<int>& labels, double gamma, int class_count,
                             Rng& rng, std::vector<char>* flipped_flags) {
    if (gamma > 0.0 && class_count < 2)
        throw std::invalid_argument("flip_labels: need at least 2 classes to flip");
    std::vector<int> out = labels;
    if (flipped_flags) flipped_flags->assign(labels.size(), 0);
    if (gamma <= 0.0) return out;
    for (size_t i = 0; i < out.size(); ++i) {
        if (rng.uniform() >= gamma) continue;
        // uniform over the other C-1 classes, never the original
        const int offset = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(class_count - 1)));
        out[i] = (labels[i] + offset) % class_count;
        if (flipped_flags) (*flipped_flags)[i] = 1;
    }
    return out;
}

std::vector<DenoisingGroup> make_denoising_groups(const std::vector<GtObject>& gts, int groups,
                                                  const NoiseConfig& cfg, int class_count,
                                                  Rng& rng) {
    if (!cfg.valid()) throw std::invalid_argument("make_denoising_groups: invalid noise config");
    std::vector<DenoisingGroup> out;
    if (groups <= 0 || gts.empty()) return out;

    std::vector<int> labels(gts.size());
    for (size_t m = 0; m < gts.size(); ++m) labels[m] = gts[m].label;

    out.resize(groups);
    for (int p = 0; p < groups; ++p) {
        std::vector<char> flags;
        const std::vector<int> flipped = flip_labels(labels, cfg.gamma, class_count, rng, &flags);
        out[p].queries.resize(gts.size());
        for (size_t m = 0; m < gts.size(); ++m) {
            NoisedQuery& q = out[p].queries[m];
            q.box = apply_box_noise(gts[m].box, cfg, rng);
            q.label = flipped[m];
            q.flipped = flags[m] != 0;
            q.target = static_cast<int>(m);
        }
    }
    return out;
}

AttentionMask build_attention_mask(int groups, int gts_per_group, int matching_count) {
    const int dn = groups * gts_per_group;
    const int w = dn + matching_count;
    AttentionMask mask;
    mask.width = w;
    mask.blocked.assign(static_cast<size_t>(w) * w, 0);
    if (dn == 0) return mask;
    for (int i = 0; i < w; ++i) {
        const int gi = i / gts_per_group;  // >= groups for all matching rows
        for (int j = 0; j < dn; ++j) {
            if (gi != j / gts_per_group) mask.at(i, j) = 1;
        }
    }
    return mask;
}

QueryBatch assemble_decoder_input(const std::vector<DenoisingGroup>& groups,
                                  const std::vector<GtObject>& gts, int matching_count,
                                  int class_count) {
    QueryBatch batch;
    batch.groups = static_cast<int>(groups.size());
    batch.gts_per_group = static_cast<int>(gts.size());
    batch.matching_count = matching_count;
    batch.class_count = class_count;
    batch.gt_objects = gts;
    batch.denoising.reserve(static_cast<size_t>(batch.groups) * batch.gts_per_group);
    for (const DenoisingGroup& g : groups) {
        if (static_cast<int>(g.queries.size()) != batch.gts_per_group)
            throw std::invalid_argument("assemble_decoder_input: group size != GT count");
        batch.denoising.insert(batch.denoising.end(), g.queries.begin(), g.queries.end());
    }
    return batch;
}

}  // namespace setdet
