// Anchor-box-query decoder with layer-wise box refinement, masked attention,
// label-embedding content queries and shared prediction heads, built on the
// autodiff tape.
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "setdet/autodiff.hpp"
#include "setdet/datagen.hpp"
#include "setdet/denoising.hpp"

namespace setdet {

struct ModelConfig {
    int classes = 8;
    int hidden_dim = 64;  // divisible by 8 (anchor encoding) and by heads
    int ffn_dim = 128;
    int decoder_layers = 3;
    int heads = 1;
    int num_queries = 16;

    bool valid() const {
        return classes >= 2 && hidden_dim >= 8 && hidden_dim % 8 == 0 && heads >= 1 &&
               hidden_dim % heads == 0 && ffn_dim >= 1 && decoder_layers >= 1 && num_queries >= 1;
    }
};

// Named parameter store with matching gradient and Adam moment buffers.
// Names follow a fixed order so checkpoints are layout-stable.
struct ModelParams {
    ModelConfig cfg;
    std::vector<std::string> names;
    std::vector<Mat> values;
    std::vector<Mat> grads;
    std::vector<Mat> adam_m;
    std::vector<Mat> adam_v;
    int64_t adam_step = 0;

    static ModelParams init(const ModelConfig& cfg, uint64_t seed);

    int find(const std::string& name) const;
    Mat& value(const std::string& name) { return values[find(name)]; }
    const Mat& value(const std::string& name) const { return values[find(name)]; }
    void zero_grads();

  private:
    std::unordered_map<std::string, int> index_;
    void add(const std::string& name, Mat m);
};

// Per-layer class logits and boxes. Node ids refer to the tape that built
// them; the final layer's entries are the model outputs o.
struct DecoderOutput {
    std::vector<int> layer_logits;  // each W x C
    std::vector<int> layer_boxes;   // each W x 4, valid cxcywh via sigmoid
    int content_input = -1;         // W x hidden content embeddings fed to layer 1
};

// Scaled-dot-product attention; masked positions get exactly zero weight and
// fully blocked rows output zeros. Returns the attended-values node.
int masked_attention(Tape& tape, int queries, int keys, int values, const AttentionMask* mask);

// One decoder block: masked self-attention, cross-attention to the feature
// map, feed-forward, then an anchor update predicted in logit space.
struct LayerIo {
    int contents;       // W x d
    int anchor_logits;  // W x 4
};
LayerIo decoder_layer(Tape& tape, ModelParams& params, int layer, LayerIo in, int memory_keys,
                      int memory_values, const AttentionMask* mask);

// Full decoder forward. In train mode the batch may carry a denoising part
// and mask must match the batch width; in infer mode the batch must contain
// only the matching part.
enum class ForwardMode { kTrain, kInfer };
DecoderOutput model_forward(Tape& tape, ModelParams& params, const FeatureMap& fm,
                            const QueryBatch& batch, const AttentionMask* mask, ForwardMode mode);

// sin/cos encoding of the 4 anchor coordinates, hidden_dim wide.
int anchor_encoding(Tape& tape, int boxes, int hidden_dim);

double inverse_sigmoid(double x);

}  // namespace setdet
