#include "setdet/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace setdet {

bool Box::valid() const {
    return std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) && std::isfinite(h) &&
           w > 0.0 && h > 0.0;
}

BoxCorners to_xyxy(const Box& b) {
    return {b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0};
}

Box from_xyxy(const BoxCorners& c) {
    return {(c.x0 + c.x1) / 2.0, (c.y0 + c.y1) / 2.0, c.x1 - c.x0, c.y1 - c.y0};
}

// Areas are taken from the corner representation so that identical boxes
// give intersection == union exactly (iou(b, b) == 1 bitwise).
double iou(const Box& a, const Box& b) {
    const BoxCorners ca = to_xyxy(a);
    const BoxCorners cb = to_xyxy(b);
    const double iw = std::min(ca.x1, cb.x1) - std::max(ca.x0, cb.x0);
    const double ih = std::min(ca.y1, cb.y1) - std::max(ca.y0, cb.y0);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double area_a = (ca.x1 - ca.x0) * (ca.y1 - ca.y0);
    const double area_b = (cb.x1 - cb.x0) * (cb.y1 - cb.y0);
    return inter / (area_a + area_b - inter);
}

double giou(const Box& a, const Box& b) {
    const BoxCorners ca = to_xyxy(a);
    const BoxCorners cb = to_xyxy(b);
    const double iw = std::max(0.0, std::min(ca.x1, cb.x1) - std::max(ca.x0, cb.x0));
    const double ih = std::max(0.0, std::min(ca.y1, cb.y1) - std::max(ca.y0, cb.y0));
    const double inter = iw * ih;
    const double area_a = (ca.x1 - ca.x0) * (ca.y1 - ca.y0);
    const double area_b = (cb.x1 - cb.x0) * (cb.y1 - cb.y0);
    const double uni = area_a + area_b - inter;
    const double ew = std::max(ca.x1, cb.x1) - std::min(ca.x0, cb.x0);
    const double eh = std::max(ca.y1, cb.y1) - std::min(ca.y0, cb.y0);
    const double enclosing = ew * eh;
    return inter / uni - (enclosing - uni) / enclosing;
}

Box clamp_to_canvas(const Box& b) {
    BoxCorners c = to_xyxy(b);
    // already on canvas: return unchanged (keeps zero-noise an exact identity)
    if (c.x0 >= 0.0 && c.y0 >= 0.0 && c.x1 <= 1.0 && c.y1 <= 1.0 && b.w >= kMinBoxSide &&
        b.h >= kMinBoxSide)
        return b;
    c.x0 = std::clamp(c.x0, 0.0, 1.0);
    c.y0 = std::clamp(c.y0, 0.0, 1.0);
    c.x1 = std::clamp(c.x1, 0.0, 1.0);
    c.y1 = std::clamp(c.y1, 0.0, 1.0);
    Box out = from_xyxy(c);
    if (out.w < kMinBoxSide) {
        out.w = kMinBoxSide;
        out.cx = std::clamp(out.cx, kMinBoxSide / 2.0, 1.0 - kMinBoxSide / 2.0);
    }
    if (out.h < kMinBoxSide) {
        out.h = kMinBoxSide;
        out.cy = std::clamp(out.cy, kMinBoxSide / 2.0, 1.0 - kMinBoxSide / 2.0);
    }
    return out;
}

Box apply_box_noise(const Box& b, const NoiseConfig& cfg, Rng& rng) {
    Box out = b;
    if (cfg.lambda1 > 0.0) {
        // uniform_open keeps |dx| strictly below lambda1 * w / 2
        out.cx += cfg.lambda1 * b.w / 2.0 * (2.0 * rng.uniform_open() - 1.0);
        out.cy += cfg.lambda1 * b.h / 2.0 * (2.0 * rng.uniform_open() - 1.0);
    }
    if (cfg.lambda2 > 0.0) {
        out.w = b.w * (1.0 - cfg.lambda2 + 2.0 * cfg.lambda2 * rng.uniform());
        out.h = b.h * (1.0 - cfg.lambda2 + 2.0 * cfg.lambda2 * rng.uniform());
    }
    return clamp_to_canvas(out);
}

}  // namespace setdet
