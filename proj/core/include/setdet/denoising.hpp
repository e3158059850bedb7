// Denoising-part construction for the decoder input: noised copies of the GT
// objects arranged in groups, the attention mask that isolates them, and the
// assembled query batch.
#pragma once

#include <vector>

#include "setdet/matching.hpp"

namespace setdet {

// One noised copy of a GT object used as a decoder query. The reconstruction
// target is always the original (pre-noise) box and label, even when the
// label was flipped.
struct NoisedQuery {
    Box box;            // noised positional anchor
    int label = 0;      // possibly flipped content label
    bool flipped = false;
    int target = 0;     // GT index m this query reconstructs
};

// A noised version of all M GT objects; target indices are 0..M-1 in order.
struct DenoisingGroup {
    std::vector<NoisedQuery> queries;
};

// W x W boolean matrix; entry (i, j) true means query i cannot attend to
// query j.
struct AttentionMask {
    int width = 0;
    std::vector<char> blocked;  // row-major

    bool at(int i, int j) const { return blocked[static_cast<size_t>(i) * width + j] != 0; }
    char& at(int i, int j) { return blocked[static_cast<size_t>(i) * width + j]; }
    bool any() const;
};

// Ordered decoder input: P*M denoising queries (group-major) followed by N
// matching queries. Matching queries carry the unknown-class content label
// (class_count) and draw their anchors from the learnable model parameters.
struct QueryBatch {
    int groups = 0;          // P
    int gts_per_group = 0;   // M
    int matching_count = 0;  // N
    int class_count = 0;     // C; content label C is the unknown class
    std::vector<NoisedQuery> denoising;  // size P*M, group-major
    std::vector<GtObject> gt_objects;    // the original targets, size M

    int denoising_count() const { return groups * gts_per_group; }
    int width() const { return denoising_count() + matching_count; }
    // 1 for denoising slots, 0 for matching slots
    int indicator(int slot) const { return slot < denoising_count() ? 1 : 0; }
};

// Flips each label independently with probability gamma; a flipped label is
// uniform over the other class_count-1 classes. Returns flipped labels and
// records which positions flipped.
std::vector<int> flip_labels(const std::vector<int>& labels, double gamma, int class_count,
                             Rng& rng, std::vector<char>* flipped_flags = nullptr);

// P independently noised versions of all GT objects.
std::vector<DenoisingGroup> make_denoising_groups(const std::vector<GtObject>& gts, int groups,
                                                  const NoiseConfig& cfg, int class_count,
                                                  Rng& rng);

// a_ij = 1 iff j < P*M and floor(i/M) != floor(j/M): denoising groups cannot
// see each other and the matching part cannot see the denoising part. The
// denoising part may see the matching part, which carries no GT information.
AttentionMask build_attention_mask(int groups, int gts_per_group, int matching_count);

QueryBatch assemble_decoder_input(const std::vector<DenoisingGroup>& groups,
                                  const std::vector<GtObject>& gts, int matching_count,
                                  int class_count);

}  // namespace setdet
