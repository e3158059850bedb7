#include "setdet/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace setdet {

double lr_at(const TrainConfig& cfg, int epoch) {
    if (epoch < 1 || epoch > cfg.epochs) throw std::invalid_argument("lr_at: epoch out of range");
    return epoch >= cfg.lr_drop_epoch ? cfg.lr * cfg.lr_drop_factor : cfg.lr;
}

void adamw_step(ModelParams& params, double lr, double weight_decay, double beta1, double beta2,
                double eps) {
    params.adam_step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(params.adam_step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(params.adam_step));
    for (size_t i = 0; i < params.values.size(); ++i) {
        Mat& p = params.values[i];
        Mat& g = params.grads[i];
        Mat& m = params.adam_m[i];
        Mat& v = params.adam_v[i];
        for (size_t j = 0; j < p.size(); ++j) {
            m.d[j] = beta1 * m.d[j] + (1.0 - beta1) * g.d[j];
            v.d[j] = beta2 * v.d[j] + (1.0 - beta2) * g.d[j] * g.d[j];
            const double mhat = m.d[j] / bc1;
            const double vhat = v.d[j] / bc2;
            p.d[j] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p.d[j]);
        }
    }
}

namespace {

// Denoising construction + forward + loss for a single scene.
int scene_loss(Tape& tape, ModelParams& params, const Scene& scene, const TrainConfig& cfg,
               Rng& rng, LossBreakdown* breakdown) {
    const int p = cfg.dn_groups;
    const auto groups =
        make_denoising_groups(scene.objects, p, cfg.noise(), cfg.classes, rng);
    const QueryBatch batch =
        assemble_decoder_input(groups, scene.objects, cfg.num_queries, cfg.classes);

    AttentionMask mask;
    const AttentionMask* mask_ptr = nullptr;
    if (cfg.use_mask && batch.denoising_count() > 0) {
        mask = build_attention_mask(batch.groups, batch.gts_per_group, batch.matching_count);
        mask_ptr = &mask;
    }
    const DecoderOutput out =
        model_forward(tape, params, scene.features, batch, mask_ptr, ForwardMode::kTrain);
    return total_loss_node(tape, out, batch, cfg.loss(), breakdown);
}

}  // namespace

LossBreakdown train_epoch(ModelParams& params, const std::vector<Scene>& train,
                          const TrainConfig& cfg, int epoch) {
    const double lr = lr_at(cfg, epoch);
    Rng rng(Rng::derive(cfg.seed, 0x65706f63ULL + static_cast<uint64_t>(epoch)));

    std::vector<int> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);

    LossBreakdown epoch_mean;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const size_t end = std::min(order.size(), start + cfg.batch_size);
        // batch-global normalization: per-scene losses are divided by the
        // scene's GT count, so reweighting by M_i / sum(M) makes every box in
        // the batch contribute equally
        double total_gts = 0.0;
        for (size_t i = start; i < end; ++i)
            total_gts += static_cast<double>(std::max<size_t>(train[order[i]].objects.size(), 1));
        params.zero_grads();
        LossBreakdown batch_mean;
        for (size_t i = start; i < end; ++i) {
            const Scene& scene = train[order[i]];
            const double weight =
                static_cast<double>(std::max<size_t>(scene.objects.size(), 1)) / total_gts;
            Tape tape;
            LossBreakdown b;
            const int loss = scene_loss(tape, params, scene, cfg, rng, &b);
            if (!std::isfinite(tape.value(loss).d[0])) {
                char msg[256];
                std::snprintf(msg, sizeof(msg),
                              "non-finite loss at epoch %d batch %d (cls=%g l1=%g giou=%g "
                              "dn_cls=%g dn_l1=%g dn_giou=%g)",
                              epoch, batches, b.cls, b.l1, b.giou, b.dn_cls, b.dn_l1, b.dn_giou);
                throw std::runtime_error(msg);
            }
            tape.backward(loss, weight);
            b.cls *= weight;
            b.l1 *= weight;
            b.giou *= weight;
            b.dn_cls *= weight;
            b.dn_l1 *= weight;
            b.dn_giou *= weight;
            b.total *= weight;
            batch_mean += b;
        }
        adamw_step(params, lr, cfg.weight_decay);
        epoch_mean += batch_mean;
        ++batches;
    }
    if (batches > 0) {
        const double inv = 1.0 / batches;
        epoch_mean.cls *= inv;
        epoch_mean.l1 *= inv;
        epoch_mean.giou *= inv;
        epoch_mean.dn_cls *= inv;
        epoch_mean.dn_l1 *= inv;
        epoch_mean.dn_giou *= inv;
        epoch_mean.total *= inv;
    }
    return epoch_mean;
}

EvalResult evaluate(ModelParams& params, const std::vector<Scene>& val, const TrainConfig& cfg) {
    EvalResult result;
    std::vector<Detection> detections;
    std::vector<std::vector<GtObject>> gts_per_image(val.size());
    result.index_vectors.resize(val.size());

    for (size_t img = 0; img < val.size(); ++img) {
        const Scene& scene = val[img];
        gts_per_image[img] = scene.objects;

        const QueryBatch batch =
            assemble_decoder_input({}, scene.objects, cfg.num_queries, cfg.classes);
        Tape tape;
        const DecoderOutput out =
            model_forward(tape, params, scene.features, batch, nullptr, ForwardMode::kInfer);
        const Mat& logits = tape.value(out.layer_logits.back());
        const Mat& boxes = tape.value(out.layer_boxes.back());

        Mat probs(logits.rows, logits.cols);
        for (size_t i = 0; i < probs.size(); ++i)
            probs.d[i] = 1.0 / (1.0 + std::exp(-logits.d[i]));

        std::vector<Box> pred_boxes(cfg.num_queries);
        for (int q = 0; q < cfg.num_queries; ++q) {
            pred_boxes[q] = {boxes.at(q, 0), boxes.at(q, 1), boxes.at(q, 2), boxes.at(q, 3)};
            int best_c = 0;
            for (int c = 1; c < cfg.classes; ++c)
                if (probs.at(q, c) > probs.at(q, best_c)) best_c = c;
            detections.push_back(
                {static_cast<int>(img), best_c, probs.at(q, best_c), pred_boxes[q]});
        }

        const Assignment a = hungarian_assign(
            build_cost_matrix(probs, pred_boxes, scene.objects, cfg.match_weights()));
        result.index_vectors[img] = index_vector(a, cfg.num_queries);
    }

    result.ap50 = average_precision(detections, gts_per_image, 0.5);
    static const std::vector<double> kThresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                                    0.75, 0.80, 0.85, 0.90, 0.95};
    result.mean_ap = mean_average_precision(detections, gts_per_image, kThresholds);
    return result;
}

double ExperimentResult::mean_is(int first, int last) const {
    double sum = 0.0;
    int count = 0;
    for (const EpochRecord& r : records) {
        if (r.epoch < first || r.epoch > last || !r.mean_is) continue;
        sum += *r.mean_is;
        ++count;
    }
    return count ? sum / count : 0.0;
}

ExperimentResult run_experiment(const TrainConfig& cfg, const std::string& out_dir, bool force) {
    const DatasetConfig data = cfg.dataset();
    return run_experiment_on(cfg, generate_split(data, false), generate_split(data, true), out_dir,
                             force);
}

ExperimentResult run_experiment_on(const TrainConfig& cfg, const std::vector<Scene>& train,
                                   const std::vector<Scene>& val, const std::string& out_dir,
                                   bool force) {
    cfg.validate();
    ExperimentResult result;
    result.digest = config_digest(cfg);

    std::ofstream csv;
    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        const fs::path csv_path = fs::path(out_dir) / "metrics.csv";
        if (fs::exists(csv_path) && !force) {
            char digest_hex[32];
            std::snprintf(digest_hex, sizeof(digest_hex), "%016llx",
                          static_cast<unsigned long long>(result.digest));
            throw std::runtime_error("refusing to overwrite existing results in " + out_dir +
                                     " (config digest " + digest_hex + "); pass force to replace");
        }
        std::ofstream cfg_file(fs::path(out_dir) / "config.txt");
        cfg_file << canonical_config(cfg);
        csv.open(csv_path, std::ios::trunc);
        if (!csv) throw std::runtime_error("cannot write metrics.csv in " + out_dir);
        csv << EpochRecord::csv_header() << "\n";
        csv.flush();
    }

    ModelParams params = ModelParams::init(cfg.model(), cfg.seed);
    std::vector<IndexVector> prev_vectors;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const LossBreakdown losses = train_epoch(params, train, cfg, epoch);
        const EvalResult eval = evaluate(params, val, cfg);
        const auto t1 = std::chrono::steady_clock::now();
        result.epoch_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());

        EpochRecord rec;
        rec.epoch = epoch;
        if (epoch >= 2) rec.mean_is = dataset_instability(eval.index_vectors, prev_vectors);
        prev_vectors = eval.index_vectors;
        rec.ap50 = eval.ap50;
        rec.mean_ap = eval.mean_ap;
        rec.loss_cls = losses.cls;
        rec.loss_l1 = losses.l1;
        rec.loss_giou = losses.giou;
        rec.loss_dn_cls = losses.dn_cls;
        rec.loss_dn_l1 = losses.dn_l1;
        rec.loss_dn_giou = losses.dn_giou;
        rec.lr = lr_at(cfg, epoch);
        result.records.push_back(rec);
        if (csv.is_open()) {
            csv << rec.csv_row() << "\n";
            csv.flush();
        }
    }

    if (!out_dir.empty()) {
        save_checkpoint(params, result.digest,
                        (std::filesystem::path(out_dir) / "checkpoint.bin").string());
    }
    return result;
}

std::vector<EpochRecord> parse_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metrics file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty metrics file: " + path);
    if (line != EpochRecord::csv_header())
        throw std::runtime_error("unexpected metrics header in " + path);
    std::vector<EpochRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() == 10) cells.push_back("");  // trailing empty field
        if (cells.size() != 11) throw std::runtime_error("malformed metrics row in " + path);
        EpochRecord r;
        r.epoch = std::stoi(cells[0]);
        if (!cells[1].empty()) r.mean_is = std::stod(cells[1]);
        r.ap50 = std::stod(cells[2]);
        r.mean_ap = std::stod(cells[3]);
        r.loss_cls = std::stod(cells[4]);
        r.loss_l1 = std::stod(cells[5]);
        r.loss_giou = std::stod(cells[6]);
        r.loss_dn_cls = std::stod(cells[7]);
        r.loss_dn_l1 = std::stod(cells[8]);
        r.loss_dn_giou = std::stod(cells[9]);
        r.lr = std::stod(cells[10]);
        records.push_back(r);
    }
    return records;
}

}  // namespace setdet
