// Normalized boxes, overlap metrics and the box-noising primitive.
#pragma once

#include "setdet/rng.hpp"

namespace setdet {

// Axis-aligned box in normalized (cx, cy, w, h) coordinates. Centers live in
// [0,1], sides in (0,1]; after clamping the xyxy corners lie in the unit
// canvas.
struct Box {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool valid() const;
};

// Corner representation (x0, y0, x1, y1).
struct BoxCorners {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;
};

// Noise scales for the denoising queries: lambda1 bounds the center shift,
// lambda2 the multiplicative side rescaling, gamma the label flip ratio.
struct NoiseConfig {
    double lambda1 = 0.4;
    double lambda2 = 0.4;
    double gamma = 0.2;

    bool valid() const {
        return lambda1 >= 0.0 && lambda1 < 1.0 && lambda2 >= 0.0 && lambda2 < 1.0 &&
               gamma >= 0.0 && gamma <= 1.0;
    }
};

// Smallest side a box may have after canvas clamping.
inline constexpr double kMinBoxSide = 1e-4;

BoxCorners to_xyxy(const Box& b);
Box from_xyxy(const BoxCorners& c);

double iou(const Box& a, const Box& b);

// IoU - (enclosing - union) / enclosing, in [-1, 1].
double giou(const Box& a, const Box& b);

// Clamps the corners to the unit canvas and enforces the minimum side.
Box clamp_to_canvas(const Box& b);

// Center shift bounded by lambda1 * side / 2 (strictly, so the noised center
// stays inside the original box), sides rescaled uniformly within
// [(1-lambda2)*s, (1+lambda2)*s], result clamped to the canvas.
Box apply_box_noise(const Box& b, const NoiseConfig& cfg, Rng& rng);

}  // namespace setdet
