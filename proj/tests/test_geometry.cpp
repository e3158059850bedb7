#include <doctest.h>

#include <cmath>

#include "setdet/geometry.hpp"
#include "support/test_util.hpp"

using namespace setdet;
using namespace setdet::testutil;

TEST_CASE("to_xyxy / from_xyxy basic conversions") {
    const BoxCorners c = to_xyxy({0.5, 0.5, 0.2, 0.2});
    CHECK(c.x0 == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(c.y0 == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(c.x1 == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(c.y1 == doctest::Approx(0.6).epsilon(1e-15));

    const BoxCorners full = to_xyxy({0.5, 0.5, 1.0, 1.0});
    CHECK(full.x0 == 0.0);
    CHECK(full.y0 == 0.0);
    CHECK(full.x1 == 1.0);
    CHECK(full.y1 == 1.0);
}

TEST_CASE("xyxy roundtrip is exact on a seeded random sweep") {
    Rng rng(20240601);
    for (int i = 0; i < 1000; ++i) {
        const Box b = random_dyadic_box(rng);
        const Box r = from_xyxy(to_xyxy(b));
        CHECK(r.cx == b.cx);
        CHECK(r.cy == b.cy);
        CHECK(r.w == b.w);
        CHECK(r.h == b.h);
    }
}

TEST_CASE("iou examples") {
    const Box b{0.3, 0.7, 0.25, 0.4};
    CHECK(iou(b, b) == 1.0);

    CHECK(iou(box_xyxy(0.0, 0.0, 0.2, 0.2), box_xyxy(0.5, 0.5, 0.9, 0.9)) == 0.0);

    // inter 0.125, union 0.375
    CHECK(iou(box_xyxy(0, 0, 0.5, 0.5), box_xyxy(0.25, 0, 0.75, 0.5)) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("giou examples") {
    const Box b{0.4, 0.4, 0.3, 0.2};
    CHECK(giou(b, b) == 1.0);

    // corner-touching quadrants: IoU 0, union 0.5, enclosing 1.0
    CHECK(giou(box_xyxy(0, 0, 0.5, 0.5), box_xyxy(0.5, 0.5, 1, 1)) == doctest::Approx(-0.5));

    // touching halves fill the enclosing box exactly
    CHECK(giou(box_xyxy(0, 0, 0.5, 1), box_xyxy(0.5, 0, 1, 1)) == doctest::Approx(0.0));
}

TEST_CASE("iou and giou are symmetric, giou bounded by iou") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const Box a = random_box(rng);
        const Box b = random_box(rng);
        CHECK(iou(a, b) == iou(b, a));
        CHECK(giou(a, b) == giou(b, a));
        CHECK(giou(a, b) <= iou(a, b) + 1e-12);
        CHECK(giou(a, b) >= -1.0);
        CHECK(iou(a, b) <= 1.0);
    }
}

TEST_CASE("giou equals iou exactly when the union fills the enclosing box") {
    // identical boxes: enclosing == union
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        const Box a = random_box(rng);
        CHECK(giou(a, a) == iou(a, a));
    }
}

TEST_CASE("zero noise returns the input box unchanged") {
    Rng rng(1);
    const NoiseConfig off{0.0, 0.0, 0.0};
    for (int i = 0; i < 100; ++i) {
        const Box b = random_box(rng, 0.01);
        const Box out = apply_box_noise(b, off, rng);
        CHECK(out.cx == b.cx);
        CHECK(out.cy == b.cy);
        CHECK(out.w == b.w);
        CHECK(out.h == b.h);
    }
}

TEST_CASE("center shift is strictly bounded by lambda1 * side / 2") {
    Rng rng(99);
    const Box b{0.5, 0.5, 0.2, 0.2};
    const NoiseConfig cfg{0.4, 0.0, 0.0};
    for (int i = 0; i < 10000; ++i) {
        const Box out = apply_box_noise(b, cfg, rng);
        CHECK(std::abs(out.cx - 0.5) < 0.04);
        CHECK(std::abs(out.cy - 0.5) < 0.04);
    }
}

TEST_CASE("noised center stays strictly inside the original box") {
    Rng rng(2024);
    for (double lambda1 : {0.4, 0.9}) {
        const NoiseConfig cfg{lambda1, 0.4, 0.0};
        for (int i = 0; i < 10000; ++i) {
            const Box b = random_box(rng, 0.02);
            const Box out = apply_box_noise(b, cfg, rng);
            const BoxCorners c = to_xyxy(b);
            CHECK(out.cx > c.x0);
            CHECK(out.cx < c.x1);
            CHECK(out.cy > c.y0);
            CHECK(out.cy < c.y1);
            CHECK(out.valid());
        }
    }
}

TEST_CASE("box scaling samples span the stated interval") {
    Rng rng(555);
    const Box b{0.5, 0.5, 0.2, 0.2};
    const NoiseConfig cfg{0.0, 0.4, 0.0};
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Box out = apply_box_noise(b, cfg, rng);
        lo = std::min(lo, out.w);
        hi = std::max(hi, out.w);
    }
    CHECK(lo >= 0.12);
    CHECK(hi <= 0.28);
    CHECK(hi - lo >= 0.95 * 0.16);  // uniform samples cover >= 95% of the interval
}

TEST_CASE("center shift is mean-zero within 3 sigma") {
    Rng rng(31337);
    const Box b{0.5, 0.5, 0.4, 0.4};
    const NoiseConfig cfg{0.4, 0.0, 0.0};
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += apply_box_noise(b, cfg, rng).cx - 0.5;
    const double half_range = 0.4 * 0.4 / 2.0;           // lambda1 * w / 2
    const double sigma = half_range / std::sqrt(3.0);    // stddev of U(-a, a)
    CHECK(std::abs(sum / n) <= 3.0 * sigma / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("clamping keeps noised boxes on canvas with a minimum side") {
    Rng rng(77);
    const NoiseConfig cfg{0.9, 0.9, 0.0};
    for (int i = 0; i < 10000; ++i) {
        const Box b = random_box(rng, 0.02);
        const Box out = apply_box_noise(b, cfg, rng);
        const BoxCorners c = to_xyxy(out);
        CHECK(c.x0 >= -1e-12);
        CHECK(c.y0 >= -1e-12);
        CHECK(c.x1 <= 1.0 + 1e-12);
        CHECK(c.y1 <= 1.0 + 1e-12);
        CHECK(out.w >= kMinBoxSide);
        CHECK(out.h >= kMinBoxSide);
    }
}
