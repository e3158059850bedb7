#include "setdet/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "setdet/rng.hpp"

namespace setdet {

namespace {

constexpr double kTwoPi = 6.283185307179586;
constexpr double kPeTemperature = 20.0;
constexpr double kClassBiasInit = -4.0;  // low sigmoid prior keeps early focal loss tame

Mat xavier(int rows, int cols, Rng& rng) {
    Mat m(rows, cols);
    const double limit = std::sqrt(6.0 / (rows + cols));
    for (double& v : m.d) v = rng.uniform(-limit, limit);
    return m;
}

Mat filled(int rows, int cols, double value) {
    Mat m(rows, cols);
    std::fill(m.d.begin(), m.d.end(), value);
    return m;
}

}  // namespace

double inverse_sigmoid(double x) {
    const double c = std::clamp(x, 1e-6, 1.0 - 1e-6);
    return std::log(c / (1.0 - c));
}

void ModelParams::add(const std::string& name, Mat m) {
    index_[name] = static_cast<int>(names.size());
    names.push_back(name);
    grads.emplace_back(m.rows, m.cols);
    adam_m.emplace_back(m.rows, m.cols);
    adam_v.emplace_back(m.rows, m.cols);
    values.push_back(std::move(m));
}

int ModelParams::find(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ModelParams: unknown parameter " + name);
    return it->second;
}

void ModelParams::zero_grads() {
    for (Mat& g : grads) g.zero();
}

ModelParams ModelParams::init(const ModelConfig& cfg, uint64_t seed) {
    if (!cfg.valid()) throw std::invalid_argument("ModelParams::init: invalid model config");
    ModelParams p;
    p.cfg = cfg;
    Rng rng(Rng::derive(seed, 0x696e6974ULL));
    const int d = cfg.hidden_dim;

    // label embedding: C classes + the unknown class, one dim reserved for
    // the indicator bit appended at assembly time
    Mat embed(cfg.classes + 1, d - 1);
    for (double& v : embed.d) v = rng.normal() / std::sqrt(static_cast<double>(d));
    p.add("label_embed", std::move(embed));

    Mat anchors(cfg.num_queries, 4);
    for (int i = 0; i < cfg.num_queries; ++i) {
        anchors.at(i, 0) = inverse_sigmoid(rng.uniform(0.1, 0.9));
        anchors.at(i, 1) = inverse_sigmoid(rng.uniform(0.1, 0.9));
        anchors.at(i, 2) = inverse_sigmoid(rng.uniform(0.1, 0.4));
        anchors.at(i, 3) = inverse_sigmoid(rng.uniform(0.1, 0.4));
    }
    p.add("anchor_logits", std::move(anchors));

    // shared anchor-encoding projection and prediction heads
    p.add("pos_w", xavier(d, d, rng));
    p.add("pos_b", Mat(1, d));
    p.add("class_w", xavier(d, cfg.classes, rng));
    p.add("class_b", filled(1, cfg.classes, kClassBiasInit));
    p.add("box_w1", xavier(d, d, rng));
    p.add("box_b1", Mat(1, d));
    p.add("box_w2", xavier(d, d, rng));
    p.add("box_b2", Mat(1, d));
    p.add("box_w3", Mat(d, 4));  // zero-init: layers start as identity refinements
    p.add("box_b3", Mat(1, 4));

    for (int l = 0; l < cfg.decoder_layers; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        for (const char* block : {"self_", "cross_"}) {
            p.add(pre + block + "wq", xavier(d, d, rng));
            p.add(pre + block + "bq", Mat(1, d));
            p.add(pre + block + "wk", xavier(d, d, rng));
            p.add(pre + block + "bk", Mat(1, d));
            p.add(pre + block + "wv", xavier(d, d, rng));
            p.add(pre + block + "bv", Mat(1, d));
            p.add(pre + block + "wo", xavier(d, d, rng));
            p.add(pre + block + "bo", Mat(1, d));
        }
        p.add(pre + "ffn_w1", xavier(d, cfg.ffn_dim, rng));
        p.add(pre + "ffn_b1", Mat(1, cfg.ffn_dim));
        p.add(pre + "ffn_w2", xavier(cfg.ffn_dim, d, rng));
        p.add(pre + "ffn_b2", Mat(1, d));
        p.add(pre + "norm1_g", filled(1, d, 1.0));
        p.add(pre + "norm1_b", Mat(1, d));
        p.add(pre + "norm2_g", filled(1, d, 1.0));
        p.add(pre + "norm2_b", Mat(1, d));
        p.add(pre + "norm3_g", filled(1, d, 1.0));
        p.add(pre + "norm3_b", Mat(1, d));
    }
    return p;
}

int anchor_encoding(Tape& tape, int boxes, int hidden_dim) {
    if (hidden_dim % 8 != 0)
        throw std::invalid_argument("anchor_encoding: hidden_dim must be divisible by 8");
    const int freqs = hidden_dim / 8;
    Mat freq_row(1, freqs);
    for (int k = 0; k < freqs; ++k)
        freq_row.d[k] = kTwoPi * std::pow(kPeTemperature, -static_cast<double>(k) / freqs);
    const int freq_node = tape.constant(std::move(freq_row));

    int out = -1;
    for (int coord = 0; coord < 4; ++coord) {
        const int x = tape.slice_cols(boxes, coord, coord + 1);
        const int scaled = tape.matmul(x, freq_node);
        const int enc = tape.concat_cols(tape.sin(scaled), tape.cos(scaled));
        out = (out < 0) ? enc : tape.concat_cols(out, enc);
    }
    return out;
}

int masked_attention(Tape& tape, int queries, int keys, int values, const AttentionMask* mask) {
    const int dk = tape.cols(queries);
    if (tape.cols(keys) != dk || tape.rows(keys) != tape.rows(values))
        throw std::invalid_argument("masked_attention: incompatible dimensions");
    const int scores = tape.scale(tape.matmul_nt(queries, keys), 1.0 / std::sqrt(dk));
    const int weights = tape.softmax_masked_rows(scores, mask);
    return tape.matmul(weights, values);
}

namespace {

struct LayerParams {
    ModelParams& p;
    std::string pre;
    Tape& tape;

    int node(const std::string& name) {
        const int i = p.find(pre + name);
        return tape.param(&p.values[i], &p.grads[i]);
    }
};

int linear(Tape& tape, int x, int w, int b) { return tape.add_rowvec(tape.matmul(x, w), b); }

// multi-head attention over pre-projected q/k/v inputs
int attention_block(Tape& tape, LayerParams& lp, const char* block, int q_in, int k_in, int v_in,
                    const AttentionMask* mask, int heads) {
    const std::string b(block);
    const int q = linear(tape, q_in, lp.node(b + "wq"), lp.node(b + "bq"));
    const int k = linear(tape, k_in, lp.node(b + "wk"), lp.node(b + "bk"));
    const int v = linear(tape, v_in, lp.node(b + "wv"), lp.node(b + "bv"));
    int attended;
    if (heads == 1) {
        attended = masked_attention(tape, q, k, v, mask);
    } else {
        const int dh = tape.cols(q) / heads;
        attended = -1;
        for (int h = 0; h < heads; ++h) {
            const int qs = tape.slice_cols(q, h * dh, (h + 1) * dh);
            const int ks = tape.slice_cols(k, h * dh, (h + 1) * dh);
            const int vs = tape.slice_cols(v, h * dh, (h + 1) * dh);
            const int o = masked_attention(tape, qs, ks, vs, mask);
            attended = (attended < 0) ? o : tape.concat_cols(attended, o);
        }
    }
    return linear(tape, attended, lp.node(b + "wo"), lp.node(b + "bo"));
}

int layer_norm_affine(Tape& tape, LayerParams& lp, const char* which, int x) {
    const std::string w(which);
    return tape.add_rowvec(
        tape.mul_rowvec(tape.layer_norm_rows(x), lp.node(w + std::string("_g"))),
        lp.node(w + std::string("_b")));
}

}  // namespace

LayerIo decoder_layer(Tape& tape, ModelParams& params, int layer, LayerIo in, int memory_keys,
                      int memory_values, const AttentionMask* mask) {
    LayerParams lp{params, "layer" + std::to_string(layer) + ".", tape};
    const int heads = params.cfg.heads;

    // positional query from the current anchors
    const int boxes_in = tape.sigmoid(in.anchor_logits);
    const int pe = anchor_encoding(tape, boxes_in, params.cfg.hidden_dim);
    const int pw = params.find("pos_w");
    const int pb = params.find("pos_b");
    const int posq = linear(tape, pe, tape.param(&params.values[pw], &params.grads[pw]),
                            tape.param(&params.values[pb], &params.grads[pb]));

    // self-attention among queries (position-aware q/k, content v)
    const int qk_in = tape.add(in.contents, posq);
    const int self_out = attention_block(tape, lp, "self_", qk_in, qk_in, in.contents, mask, heads);
    const int x1 = layer_norm_affine(tape, lp, "norm1", tape.add(in.contents, self_out));

    // cross-attention into the scene features
    const int cross_q = tape.add(x1, posq);
    const int cross_out =
        attention_block(tape, lp, "cross_", cross_q, memory_keys, memory_values, nullptr, heads);
    const int x2 = layer_norm_affine(tape, lp, "norm2", tape.add(x1, cross_out));

    const int h = tape.relu(linear(tape, x2, lp.node("ffn_w1"), lp.node("ffn_b1")));
    const int f = linear(tape, h, lp.node("ffn_w2"), lp.node("ffn_b2"));
    const int x3 = layer_norm_affine(tape, lp, "norm3", tape.add(x2, f));

    // anchor update in logit space keeps every refined box valid
    auto head_node = [&](const char* name) {
        const int i = params.find(name);
        return tape.param(&params.values[i], &params.grads[i]);
    };
    const int h1 = tape.relu(linear(tape, x3, head_node("box_w1"), head_node("box_b1")));
    const int h2 = tape.relu(linear(tape, h1, head_node("box_w2"), head_node("box_b2")));
    const int delta = linear(tape, h2, head_node("box_w3"), head_node("box_b3"));

    return LayerIo{x3, tape.add(in.anchor_logits, delta)};
}

DecoderOutput model_forward(Tape& tape, ModelParams& params, const FeatureMap& fm,
                            const QueryBatch& batch, const AttentionMask* mask, ForwardMode mode) {
    const ModelConfig& cfg = params.cfg;
    if (fm.dim != cfg.hidden_dim)
        throw std::invalid_argument("model_forward: feature dim != hidden_dim");
    if (batch.matching_count != cfg.num_queries)
        throw std::invalid_argument("model_forward: batch matching count != num_queries");
    if (batch.class_count != cfg.classes)
        throw std::invalid_argument("model_forward: batch class count != model classes");
    const int dn = batch.denoising_count();
    const int w = batch.width();
    if (mode == ForwardMode::kInfer && dn != 0)
        throw std::invalid_argument("model_forward: infer mode requires an empty denoising part");
    if (mode == ForwardMode::kTrain && mask && mask->width != w)
        throw std::invalid_argument("model_forward: mask width != query count");

    // content embeddings: label rows for the denoising part, the unknown-class
    // row for every matching query, indicator bit appended
    std::vector<int> label_rows(w);
    Mat indicator(w, 1);
    for (int i = 0; i < dn; ++i) {
        label_rows[i] = batch.denoising[i].label;
        indicator.d[i] = 1.0;
    }
    for (int i = dn; i < w; ++i) label_rows[i] = cfg.classes;  // unknown class
    const int embed_idx = params.find("label_embed");
    const int table = tape.param(&params.values[embed_idx], &params.grads[embed_idx]);
    const int content0 =
        tape.concat_cols(tape.gather_rows(table, label_rows), tape.constant(std::move(indicator)));

    // initial anchors: noised GT boxes (constants) then learnable logits
    const int anchor_idx = params.find("anchor_logits");
    const int learnable = tape.param(&params.values[anchor_idx], &params.grads[anchor_idx]);
    int anchors0 = learnable;
    if (dn > 0) {
        Mat noised(dn, 4);
        for (int i = 0; i < dn; ++i) {
            const Box& b = batch.denoising[i].box;
            noised.at(i, 0) = inverse_sigmoid(b.cx);
            noised.at(i, 1) = inverse_sigmoid(b.cy);
            noised.at(i, 2) = inverse_sigmoid(b.w);
            noised.at(i, 3) = inverse_sigmoid(b.h);
        }
        anchors0 = tape.concat_rows(tape.constant(std::move(noised)), learnable);
    }

    Mat mem_kpos(fm.features.rows, fm.features.cols);
    for (size_t i = 0; i < mem_kpos.size(); ++i)
        mem_kpos.d[i] = fm.features.d[i] + fm.positions.d[i];
    const int memory_keys = tape.constant(std::move(mem_kpos));
    const int memory_values = tape.constant(fm.features);

    DecoderOutput out;
    out.content_input = content0;
    const int cw = params.find("class_w");
    const int cb = params.find("class_b");
    LayerIo io{content0, anchors0};
    for (int l = 0; l < cfg.decoder_layers; ++l) {
        io = decoder_layer(tape, params, l, io, memory_keys, memory_values, mask);
        out.layer_logits.push_back(linear(tape, io.contents,
                                          tape.param(&params.values[cw], &params.grads[cw]),
                                          tape.param(&params.values[cb], &params.grads[cb])));
        out.layer_boxes.push_back(tape.sigmoid(io.anchor_logits));
    }
    return out;
}

}  // namespace setdet
