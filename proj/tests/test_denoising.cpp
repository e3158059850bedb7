#include <doctest.h>

#include <stdexcept>

#include "setdet/denoising.hpp"
#include "support/test_util.hpp"

using namespace setdet;
using namespace setdet::testutil;

namespace {

std::vector<GtObject> random_gts(Rng& rng, int count, int classes) {
    std::vector<GtObject> gts;
    for (int i = 0; i < count; ++i)
        gts.push_back({random_box(rng, 0.05), static_cast<int>(rng.below(classes))});
    return gts;
}

}  // namespace

TEST_CASE("flip_labels") {
    Rng rng(1);
    const std::vector<int> labels = {0, 1, 2, 3, 0, 1, 2, 3};

    SUBCASE("gamma 0 flips nothing") {
        std::vector<char> flags;
        CHECK(flip_labels(labels, 0.0, 4, rng, &flags) == labels);
        for (char f : flags) CHECK(f == 0);
    }

    SUBCASE("gamma 1 flips everything to a different class") {
        for (int trial = 0; trial < 100; ++trial) {
            const auto out = flip_labels(labels, 1.0, 4, rng);
            for (size_t i = 0; i < labels.size(); ++i) {
                CHECK(out[i] != labels[i]);
                CHECK(out[i] >= 0);
                CHECK(out[i] < 4);
            }
        }
    }

    SUBCASE("empirical flip rate around gamma") {
        std::vector<int> many(10000, 3);
        std::vector<char> flags;
        flip_labels(many, 0.2, 8, rng, &flags);
        int flips = 0;
        for (char f : flags) flips += f;
        const double rate = flips / 10000.0;
        CHECK(rate >= 0.18);
        CHECK(rate <= 0.22);
    }

    SUBCASE("fewer than 2 classes cannot flip") {
        CHECK_THROWS_AS(flip_labels(labels, 0.5, 1, rng), std::invalid_argument);
        CHECK(flip_labels({0, 0}, 0.0, 1, rng) == std::vector<int>{0, 0});
    }
}

TEST_CASE("make_denoising_groups") {
    Rng rng(7);

    SUBCASE("zero noise reproduces the GT objects exactly") {
        const auto gts = random_gts(rng, 4, 8);
        const auto groups = make_denoising_groups(gts, 3, {0.0, 0.0, 0.0}, 8, rng);
        REQUIRE(groups.size() == 3);
        for (const auto& g : groups) {
            REQUIRE(g.queries.size() == 4);
            for (size_t m = 0; m < 4; ++m) {
                CHECK(g.queries[m].box.cx == gts[m].box.cx);
                CHECK(g.queries[m].box.w == gts[m].box.w);
                CHECK(g.queries[m].label == gts[m].label);
                CHECK(!g.queries[m].flipped);
                CHECK(g.queries[m].target == static_cast<int>(m));
            }
        }
    }

    SUBCASE("five groups of three GTs give fifteen queries") {
        const auto gts = random_gts(rng, 3, 8);
        const auto groups = make_denoising_groups(gts, 5, {0.4, 0.4, 0.2}, 8, rng);
        const auto batch = assemble_decoder_input(groups, gts, 16, 8);
        CHECK(batch.denoising_count() == 15);
        CHECK(batch.width() == 31);
    }

    SUBCASE("group-major layout: query k has group k/M and target k mod M") {
        const auto gts = random_gts(rng, 3, 8);
        const auto groups = make_denoising_groups(gts, 4, {0.4, 0.4, 0.2}, 8, rng);
        const auto batch = assemble_decoder_input(groups, gts, 8, 8);
        for (int k = 0; k < batch.denoising_count(); ++k) {
            CHECK(batch.denoising[k].target == k % 3);
            // the k-th flattened query is the (k mod M)-th query of group k/M
            CHECK(batch.denoising[k].box.cx == groups[k / 3].queries[k % 3].box.cx);
        }
    }

    SUBCASE("independent noise across groups") {
        const auto gts = random_gts(rng, 2, 8);
        const auto groups = make_denoising_groups(gts, 2, {0.4, 0.4, 0.0}, 8, rng);
        CHECK(groups[0].queries[0].box.cx != groups[1].queries[0].box.cx);
    }

    SUBCASE("P = 0 yields an empty denoising part") {
        const auto gts = random_gts(rng, 2, 8);
        CHECK(make_denoising_groups(gts, 0, {0.4, 0.4, 0.2}, 8, rng).empty());
    }
}

TEST_CASE("attention mask closed form") {
    SUBCASE("P=2 M=1 N=1") {
        const AttentionMask m = build_attention_mask(2, 1, 1);
        REQUIRE(m.width == 3);
        const int expect[3][3] = {{0, 1, 0}, {1, 0, 0}, {1, 1, 0}};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(m.at(i, j) == (expect[i][j] != 0));
    }

    SUBCASE("P=0 is all zeros") {
        const AttentionMask m = build_attention_mask(0, 3, 4);
        CHECK(m.width == 4);
        CHECK(!m.any());
    }

    SUBCASE("P=1 M=2 N=2") {
        const AttentionMask m = build_attention_mask(1, 2, 2);
        REQUIRE(m.width == 4);
        for (int j = 0; j < 4; ++j) {
            CHECK(!m.at(0, j));
            CHECK(!m.at(1, j));
        }
        for (int i = 2; i < 4; ++i) {
            CHECK(m.at(i, 0));
            CHECK(m.at(i, 1));
            CHECK(!m.at(i, 2));
            CHECK(!m.at(i, 3));
        }
    }
}

TEST_CASE("attention mask invariants over a parameter sweep") {
    for (int p = 0; p <= 4; ++p) {
        for (int m = 1; m <= 5; ++m) {
            for (int n = 1; n <= 8; ++n) {
                const AttentionMask mask = build_attention_mask(p, m, n);
                const int dn = p * m;
                REQUIRE(mask.width == dn + n);

                // symmetry inside the denoising part
                for (int i = 0; i < dn; ++i)
                    for (int j = 0; j < dn; ++j) CHECK(mask.at(i, j) == mask.at(j, i));

                // matching rows are blocked from every denoising column
                for (int i = dn; i < mask.width; ++i) {
                    for (int j = 0; j < dn; ++j) CHECK(mask.at(i, j));
                    for (int j = dn; j < mask.width; ++j) CHECK(!mask.at(i, j));
                }

                // group isolation in both directions, free flow within groups
                for (int i = 0; i < dn; ++i) {
                    for (int j = 0; j < dn; ++j)
                        CHECK(mask.at(i, j) == (i / m != j / m));
                    // the denoising part may see the matching part
                    for (int j = dn; j < mask.width; ++j) CHECK(!mask.at(i, j));
                }
            }
        }
    }
}

TEST_CASE("assemble_decoder_input") {
    Rng rng(3);

    SUBCASE("P=0 batch is matching-only") {
        const auto gts = random_gts(rng, 2, 8);
        const auto batch = assemble_decoder_input({}, gts, 5, 8);
        CHECK(batch.width() == 5);
        CHECK(batch.denoising_count() == 0);
        for (int i = 0; i < 5; ++i) CHECK(batch.indicator(i) == 0);
    }

    SUBCASE("indicator vector for P=1 M=2 N=3") {
        const auto gts = random_gts(rng, 2, 8);
        const auto groups = make_denoising_groups(gts, 1, {0.1, 0.1, 0.0}, 8, rng);
        const auto batch = assemble_decoder_input(groups, gts, 3, 8);
        const std::vector<int> expect = {1, 1, 0, 0, 0};
        for (int i = 0; i < batch.width(); ++i) CHECK(batch.indicator(i) == expect[i]);
    }

    SUBCASE("flipped queries keep the original reconstruction target") {
        const auto gts = random_gts(rng, 6, 8);
        const auto groups = make_denoising_groups(gts, 2, {0.0, 0.0, 1.0}, 8, rng);
        const auto batch = assemble_decoder_input(groups, gts, 4, 8);
        for (const NoisedQuery& q : batch.denoising) {
            CHECK(q.flipped);
            CHECK(q.label != gts[q.target].label);             // content label is flipped
            CHECK(batch.gt_objects[q.target].label == gts[q.target].label);  // target unchanged
        }
    }
}
