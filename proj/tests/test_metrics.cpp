#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vforge/metrics.hpp"
#include "vforge/reference.hpp"
#include "vforge/rng.hpp"

using namespace vforge;

namespace {

BinaryMask tube(Shape s, int r, int x0, int x1) {
    BinaryMask m(s);
    int cz = s.d / 2, cy = s.h / 2;
    for (int z = cz - r; z <= cz + r; ++z)
        for (int y = cy - r; y <= cy + r; ++y)
            for (int x = x0; x < x1; ++x) m.at(z, y, x) = 1;
    return m;
}

BinaryMask random_mask(Shape s, double p, uint64_t seed) {
    Rng rng(seed, 0);
    BinaryMask m(s);
    for (auto& b : m.data) b = rng.bernoulli(p) ? 1 : 0;
    return m;
}

}  // namespace

TEST_CASE("dice: identity, disjoint, and counted overlap") {
    BinaryMask a({6, 6, 6});
    a.at(2, 2, 2) = a.at(2, 2, 3) = a.at(2, 3, 2) = a.at(3, 2, 2) = 1;
    CHECK(metrics::dice(a, a) == 1.0);

    BinaryMask b({6, 6, 6});
    b.at(5, 5, 5) = 1;
    CHECK(metrics::dice(a, b) == 0.0);

    // |P|=4, |L|=4, |P n L|=2 -> 0.5
    BinaryMask c({6, 6, 6});
    c.at(2, 2, 2) = c.at(2, 2, 3) = c.at(4, 4, 4) = c.at(4, 4, 5) = 1;
    CHECK(metrics::dice(a, c) == 0.5);
}

TEST_CASE("dice: both-empty convention and shape mismatch") {
    BinaryMask a({4, 4, 4}), b({4, 4, 4});
    CHECK(metrics::dice(a, b) == 1.0);
    BinaryMask c({5, 5, 5});
    CHECK_THROWS_AS(metrics::dice(a, c), Error);
}

TEST_CASE("dice: symmetric and matches the counting oracle") {
    for (uint64_t seed : {1u, 2u, 3u}) {
        BinaryMask a = random_mask({8, 8, 8}, 0.3, seed);
        BinaryMask b = random_mask({8, 8, 8}, 0.3, seed + 100);
        CHECK(metrics::dice(a, b) == metrics::dice(b, a));
        CHECK(metrics::dice(a, b) == doctest::Approx(serial::dice_counted(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("dice: adding a true-positive voxel never decreases the score") {
    BinaryMask gt = random_mask({8, 8, 8}, 0.3, 5);
    BinaryMask pred = random_mask({8, 8, 8}, 0.2, 6);
    double before = metrics::dice(pred, gt);
    for (int64_t i = 0; i < gt.shape.voxels(); ++i)
        if (gt.data[size_t(i)] && !pred.data[size_t(i)]) {
            pred.data[size_t(i)] = 1;
            double after = metrics::dice(pred, gt);
            CHECK(after >= before);
            before = after;
        }
}

TEST_CASE("cldice: identical thin tube scores 1") {
    BinaryMask line({5, 5, 20});
    for (int x = 2; x < 18; ++x) line.at(2, 2, x) = 1;
    metrics::MetricReport r = metrics::cldice(line, line);
    CHECK(r.cldice == 1.0);
    CHECK(r.tprec == 1.0);
    CHECK(r.tsens == 1.0);
}

TEST_CASE("cldice: disjoint tubes score 0") {
    BinaryMask a({8, 8, 20}), b({8, 8, 20});
    for (int x = 0; x < 20; ++x) {
        a.at(2, 2, x) = 1;
        b.at(5, 5, x) = 1;
    }
    CHECK(metrics::cldice(a, b).cldice == 0.0);
}

TEST_CASE("cldice: empty-skeleton conventions") {
    BinaryMask empty({6, 6, 6});
    CHECK(metrics::cldice(empty, empty).cldice == 1.0);
    BinaryMask something({6, 6, 6});
    something.at(3, 3, 3) = 1;
    CHECK(metrics::cldice(empty, something).cldice == 0.0);
    CHECK(metrics::cldice(something, empty).cldice == 0.0);
}

TEST_CASE("cldice: a broken tube is punished harder than dice") {
    Shape s{11, 11, 24};
    BinaryMask gt = tube(s, 2, 2, 22);       // solid 5x5 tube, length 20
    BinaryMask pred = tube(s, 2, 2, 22);
    for (int z = 0; z < s.d; ++z)            // remove a 2-slice mid gap
        for (int y = 0; y < s.h; ++y) {
            pred.at(z, y, 11) = 0;
            pred.at(z, y, 12) = 0;
        }
    metrics::MetricReport r = metrics::cldice(pred, gt);
    CHECK(r.dice == doctest::Approx(serial::dice_counted(pred, gt)).epsilon(1e-12));
    CHECK(r.cldice < r.dice);
    CHECK(r.cldice > 0.0);
}

TEST_CASE("cldice: pred == gt scores 1 for any mask") {
    for (uint64_t seed : {11u, 12u, 13u}) {
        BinaryMask m = random_mask({10, 10, 10}, 0.25, seed);
        if (count_foreground(m) == 0) continue;
        CHECK(metrics::cldice(m, m).cldice == 1.0);
    }
}

TEST_CASE("cldice: report counts are internally consistent") {
    BinaryMask a = random_mask({8, 8, 8}, 0.3, 9);
    BinaryMask b = random_mask({8, 8, 8}, 0.3, 10);
    metrics::MetricReport r = metrics::cldice(a, b);
    CHECK(r.n_inter <= std::min(r.n_pred, r.n_gt));
    CHECK(r.n_pred == count_foreground(a));
    CHECK(r.n_gt == count_foreground(b));
    CHECK(r.cldice >= 0.0);
    CHECK(r.cldice <= 1.0);
}

TEST_CASE("aggregate: macro average over pairs") {
    metrics::MetricReport a, b;
    a.dice = 1.0;
    a.cldice = 0.5;
    b.dice = 0.5;
    b.cldice = 0.25;
    metrics::MetricReport m = metrics::aggregate({a, b});
    CHECK(m.dice == doctest::Approx(0.75));
    CHECK(m.cldice == doctest::Approx(0.375));
}
