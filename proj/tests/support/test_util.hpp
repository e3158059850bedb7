// Shared helpers for the test suites.
#pragma once

#include <cmath>
#include <vector>

#include "setdet/geometry.hpp"
#include "setdet/rng.hpp"

namespace setdet::testutil {

inline Box box_xyxy(double x0, double y0, double x1, double y1) {
    return from_xyxy({x0, y0, x1, y1});
}

// Random valid box with sides in [min_side, 0.6], fully on canvas.
inline Box random_box(Rng& rng, double min_side = 0.01) {
    Box b;
    b.w = rng.uniform(min_side, 0.6);
    b.h = rng.uniform(min_side, 0.6);
    b.cx = rng.uniform(b.w / 2.0, 1.0 - b.w / 2.0);
    b.cy = rng.uniform(b.h / 2.0, 1.0 - b.h / 2.0);
    return b;
}

// Random box on a dyadic grid: centers are multiples of 2^-20, sides
// multiples of 2^-19, so corner arithmetic is exact in doubles.
inline Box random_dyadic_box(Rng& rng) {
    const double grid = 0x1.0p-20;
    const int max_side = 1 << 18;  // sides up to 0.5
    Box b;
    b.w = 2.0 * grid * static_cast<double>(1 + rng.below(max_side));
    b.h = 2.0 * grid * static_cast<double>(1 + rng.below(max_side));
    const int span_x = static_cast<int>((1.0 - b.w) / grid);
    const int span_y = static_cast<int>((1.0 - b.h) / grid);
    b.cx = b.w / 2.0 + grid * static_cast<double>(rng.below(span_x + 1));
    b.cy = b.h / 2.0 + grid * static_cast<double>(rng.below(span_y + 1));
    return b;
}

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace setdet::testutil
