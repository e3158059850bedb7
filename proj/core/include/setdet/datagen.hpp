// Deterministic synthetic detection scenes: GT objects plus the feature grid
// the decoder cross-attends to. Stands in for real images at desk scale.
#pragma once

#include <string>
#include <vector>

#include "setdet/mat.hpp"
#include "setdet/matching.hpp"

namespace setdet {

// G x G grid of d-dimensional features with fixed 2D sinusoidal positional
// encodings, both flattened row-major to G*G rows.
struct FeatureMap {
    int grid = 0;
    int dim = 0;
    Mat features;   // (G*G) x d
    Mat positions;  // (G*G) x d
};

struct Scene {
    uint64_t seed = 0;
    std::vector<GtObject> objects;
    FeatureMap features;
};

struct DatasetConfig {
    int n_train = 2000;
    int n_val = 200;
    int classes = 8;
    int kmax = 5;
    int grid = 8;
    int dim = 64;
    uint64_t master_seed = 12345;

    bool valid() const {
        return n_train >= 1 && n_val >= 1 && classes >= 2 && kmax >= 1 && grid >= 1 &&
               dim >= classes && dim % 4 == 0;
    }
};

// Per-class soft-occupancy channels (fraction of each cell covered, capped at
// 1) linearly embedded to `dim` with a fixed projection derived from
// projection_seed, plus 2D sinusoidal positions. Throws when dim < classes.
FeatureMap render_features(const std::vector<GtObject>& objects, int classes, int grid, int dim,
                           uint64_t projection_seed);

// Scene `index` of the dataset. Derived from (master_seed, index) only, so
// any scene is reproducible in isolation. Train scenes use indices
// [0, n_train), validation scenes [n_train, n_train + n_val).
Scene generate_scene(const DatasetConfig& cfg, int index);

std::vector<Scene> generate_split(const DatasetConfig& cfg, bool validation);

// One JSON object per line: seed, boxes (cxcywh), labels.
std::string scene_dump_record(const Scene& scene, int index);

// 2D sinusoidal grid encoding shared by datagen and the model's anchor
// encoding (same frequency schedule).
Mat grid_positional_encoding(int grid, int dim);

}  // namespace setdet
