#include "setdet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "setdet/geometry.hpp"
#include "setdet/rng.hpp"

namespace setdet {

namespace {

constexpr double kTwoPi = 6.283185307179586;
constexpr double kPeTemperature = 20.0;  // frequency base for [0,1] coordinates

// sin/cos features of one normalized coordinate, `dim` values (dim even).
void encode_coordinate(double x, int dim, double* out) {
    const int freqs = dim / 2;
    for (int k = 0; k < freqs; ++k) {
        const double omega = kTwoPi * std::pow(kPeTemperature, -static_cast<double>(k) / freqs);
        out[k] = std::sin(omega * x);
        out[freqs + k] = std::cos(omega * x);
    }
}

}  // namespace

Mat grid_positional_encoding(int grid, int dim) {
    if (dim % 4 != 0) throw std::invalid_argument("grid_positional_encoding: dim must be divisible by 4");
    Mat pos(grid * grid, dim);
    const int half = dim / 2;
    for (int v = 0; v < grid; ++v) {
        for (int u = 0; u < grid; ++u) {
            double* row = pos.row(v * grid + u);
            encode_coordinate((u + 0.5) / grid, half, row);
            encode_coordinate((v + 0.5) / grid, half, row + half);
        }
    }
    return pos;
}

FeatureMap render_features(const std::vector<GtObject>& objects, int classes, int grid, int dim,
                           uint64_t projection_seed) {
    if (dim < classes) throw std::invalid_argument("render_features: dim < class count");
    if (dim % 4 != 0) throw std::invalid_argument("render_features: dim must be divisible by 4");

    // per-cell per-class coverage fractions, capped at 1
    Mat occupancy(grid * grid, classes);
    const double cell = 1.0 / grid;
    for (const GtObject& obj : objects) {
        const BoxCorners c = to_xyxy(obj.box);
        for (int v = 0; v < grid; ++v) {
            const double y0 = v * cell, y1 = y0 + cell;
            const double ih = std::min(c.y1, y1) - std::max(c.y0, y0);
            if (ih <= 0.0) continue;
            for (int u = 0; u < grid; ++u) {
                const double x0 = u * cell, x1 = x0 + cell;
                const double iw = std::min(c.x1, x1) - std::max(c.x0, x0);
                if (iw <= 0.0) continue;
                double& slot = occupancy.at(v * grid + u, obj.label);
                slot = std::min(1.0, slot + (iw * ih) / (cell * cell));
            }
        }
    }

    // fixed projection, same for every scene of a dataset
    Rng proj_rng(Rng::derive(projection_seed, 0x70726f6aULL));
    Mat projection(classes, dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(classes));
    for (double& v : projection.d) v = proj_rng.normal() * scale;

    FeatureMap fm;
    fm.grid = grid;
    fm.dim = dim;
    fm.features = Mat(grid * grid, dim);
    Mat::matmul_acc(occupancy, projection, fm.features);
    fm.positions = grid_positional_encoding(grid, dim);
    return fm;
}

Scene generate_scene(const DatasetConfig& cfg, int index) {
    if (!cfg.valid()) throw std::invalid_argument("generate_scene: invalid dataset config");
    Scene scene;
    scene.seed = Rng::derive(cfg.master_seed, static_cast<uint64_t>(index));
    Rng rng(scene.seed);

    const int k = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(cfg.kmax)));
    scene.objects.resize(k);
    for (GtObject& obj : scene.objects) {
        // sides in [0.05, 0.5], centers placed so the box stays on canvas
        obj.box.w = rng.uniform(0.05, 0.5);
        obj.box.h = rng.uniform(0.05, 0.5);
        obj.box.cx = rng.uniform(obj.box.w / 2.0, 1.0 - obj.box.w / 2.0);
        obj.box.cy = rng.uniform(obj.box.h / 2.0, 1.0 - obj.box.h / 2.0);
        obj.label = static_cast<int>(rng.below(static_cast<uint64_t>(cfg.classes)));
    }
    scene.features =
        render_features(scene.objects, cfg.classes, cfg.grid, cfg.dim, cfg.master_seed);
    return scene;
}

std::vector<Scene> generate_split(const DatasetConfig& cfg, bool validation) {
    const int begin = validation ? cfg.n_train : 0;
    const int count = validation ? cfg.n_val : cfg.n_train;
    std::vector<Scene> scenes;
    scenes.reserve(count);
    for (int i = 0; i < count; ++i) scenes.push_back(generate_scene(cfg, begin + i));
    return scenes;
}

std::string scene_dump_record(const Scene& scene, int index) {
    std::string s;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "{\"index\":%d,\"seed\":%llu,\"boxes\":[", index,
                  static_cast<unsigned long long>(scene.seed));
    s += buf;
    for (size_t i = 0; i < scene.objects.size(); ++i) {
        const Box& b = scene.objects[i].box;
        std::snprintf(buf, sizeof(buf), "%s[%.17g,%.17g,%.17g,%.17g]", i ? "," : "", b.cx, b.cy,
                      b.w, b.h);
        s += buf;
    }
    s += "],\"labels\":[";
    for (size_t i = 0; i < scene.objects.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s%d", i ? "," : "", scene.objects[i].label);
        s += buf;
    }
    s += "]}";
    return s;
}

}  // namespace setdet
