#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vforge/metrics.hpp"
#include "vforge/preprocess.hpp"
#include "vforge/reference.hpp"
#include "vforge/rng.hpp"

using namespace vforge;
using namespace vforge::preprocess;

TEST_CASE("percentile: nearest-rank on 0..99") {
    Volume v({1, 10, 10});
    for (int i = 0; i < 100; ++i) v.data[size_t(i)] = float(99 - i);  // unsorted on purpose
    CHECK(percentile(v, 0) == 0.f);
    CHECK(percentile(v, 20) == 19.f);   // ceil(0.20*100)=20 -> sorted[19]
    CHECK(percentile(v, 98) == 97.f);
    CHECK(percentile(v, 100) == 99.f);
}

TEST_CASE("clip_rescale: (0,100) on data spanning [0,1] is unchanged") {
    Volume v({1, 2, 3});
    v.data = {0.f, 0.2f, 0.5f, 0.7f, 0.9f, 1.f};
    Volume out = clip_rescale(v, {0, 100});
    for (size_t i = 0; i < v.data.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(v.data[i]).epsilon(1e-6));
}

TEST_CASE("clip_rescale: values below the low percentile map to 0") {
    Volume v({1, 10, 10});
    for (int i = 0; i < 100; ++i) v.data[size_t(i)] = float(i);
    Volume out = clip_rescale(v, {20, 98});
    float lo = 19.f, hi = 97.f;
    for (int i = 0; i < 100; ++i) {
        if (float(i) <= lo) CHECK(out.data[size_t(i)] == 0.f);
        if (float(i) >= hi) CHECK(out.data[size_t(i)] == 1.f);
    }
    // Order preserved on the clipped range.
    for (int i = 1; i < 100; ++i) CHECK(out.data[size_t(i)] >= out.data[size_t(i - 1)]);
}

TEST_CASE("clip_rescale: constant input gives zeros and a warning flag") {
    Volume v({4, 4, 4}, 0.7f);
    bool constant = false;
    Volume out = clip_rescale(v, {0, 98}, &constant);
    CHECK(constant);
    for (float x : out.data) CHECK(x == 0.f);
}

TEST_CASE("resample_spacing: identity when target equals source") {
    Volume v({6, 6, 6});
    for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = float(i);
    v.spacing = Spacing{1.f, 1.f, 1.f};
    Volume out = resample_spacing(v, {1.f, 1.f, 1.f}, ops::Interp::Trilinear);
    CHECK(out.shape == v.shape);
    CHECK(out.data == v.data);
}

TEST_CASE("resample_spacing: halving z spacing doubles the z extent") {
    Volume v({8, 6, 6}, 0.4f);
    v.spacing = Spacing{2.f, 1.f, 1.f};
    Volume out = resample_spacing(v, {1.f, 1.f, 1.f}, ops::Interp::Trilinear);
    CHECK(out.shape == Shape{16, 6, 6});
    REQUIRE(out.spacing.has_value());
    CHECK(out.spacing->z == 1.f);
    for (float x : out.data) CHECK(x == doctest::Approx(0.4f).epsilon(1e-6));
}

TEST_CASE("resample_spacing: masks stay binary; missing spacing errors") {
    Rng rng(3, 0);
    BinaryMask m({8, 8, 8});
    for (auto& b : m.data) b = rng.bernoulli(0.4) ? 1 : 0;
    m.spacing = Spacing{1.f, 1.f, 2.f};
    BinaryMask out = resample_spacing(m, {1.f, 1.f, 1.f});
    CHECK(out.shape == Shape{8, 8, 16});
    for (uint8_t b : out.data) CHECK((b == 0 || b == 1));

    BinaryMask no_meta({4, 4, 4});
    CHECK_THROWS_WITH_AS(resample_spacing(no_meta, {1.f, 1.f, 1.f}),
                         doctest::Contains("missing-spacing"), Error);
}

TEST_CASE("smooth_labels: sigma 0 identity; empty stays empty; sandwich bound") {
    BinaryMask cube({12, 12, 12});
    for (int z = 3; z < 9; ++z)
        for (int y = 3; y < 9; ++y)
            for (int x = 3; x < 9; ++x) cube.at(z, y, x) = 1;

    CHECK(smooth_labels(cube, 0.f, 0.5f).data == cube.data);
    CHECK(count_foreground(smooth_labels(BinaryMask({6, 6, 6}), 1.f, 0.5f)) == 0);

    BinaryMask out = smooth_labels(cube, 1.f, 0.5f);
    BinaryMask lower = serial::erode_scan(cube, 1, false);
    BinaryMask upper = serial::dilate_scan(cube, 1);
    for (size_t i = 0; i < out.data.size(); ++i) {
        if (lower.data[i]) CHECK(out.data[i] == 1);
        if (!upper.data[i]) CHECK(out.data[i] == 0);
    }
}

TEST_CASE("improve_labels_hr: all-zero image yields an empty mask") {
    Volume v({16, 16, 16}, 0.f);
    CHECK(count_foreground(improve_labels_hr(v, {})) == 0);
}

TEST_CASE("improve_labels_hr: constant bright image yields all ones") {
    Volume v({12, 12, 12}, 1.f);
    LabelImproveParams p;
    p.filter_size = 3;
    BinaryMask out = improve_labels_hr(v, p);
    CHECK(count_foreground(out) == v.shape.voxels());
}

TEST_CASE("improve_labels_hr: recovers a bright noisy tube with dice >= 0.95") {
    Shape s{48, 48, 48};
    BinaryMask truth(s);
    int cz = 24, cy = 24, r = 3;
    for (int z = cz - r; z <= cz + r; ++z)
        for (int y = cy - r; y <= cy + r; ++y)
            for (int x = 4; x < 44; ++x)
                if ((z - cz) * (z - cz) + (y - cy) * (y - cy) <= r * r) truth.at(z, y, x) = 1;

    Rng rng(17, 0);
    Volume img(s);
    for (int64_t i = 0; i < s.voxels(); ++i) {
        float base = truth.data[size_t(i)] ? 1.0f : 0.2f;
        img.data[size_t(i)] = std::clamp(base + float(rng.normal()) * 0.02f, 0.f, 1.f);
    }
    BinaryMask recovered = improve_labels_hr(img, {});  // paper constants
    CHECK(metrics::dice(recovered, truth) >= 0.95);
}

TEST_CASE("reflect_pad_to: padded z region mirrors the tail slices in reverse") {
    Shape in_shape{10, 6, 6};
    Volume v(in_shape);
    for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = float(i);
    Volume out = reflect_pad_to(v, {16, 6, 6});
    REQUIRE(out.shape == Shape{16, 6, 6});
    for (int k = 0; k < 6; ++k)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x) CHECK(out.at(10 + k, y, x) == v.at(9 - k, y, x));
}

TEST_CASE("extract_patches: exact-size volume gives one identity patch") {
    Shape s{32, 32, 32};
    Volume v(s);
    for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = float(i % 113);
    BinaryMask l(s);
    l.at(2, 2, 2) = 1;
    auto patches = extract_patches(v, l, s, 7);
    REQUIRE(patches.size() == 1);
    CHECK(patches[0].image.data == v.data);
    CHECK(patches[0].label.data == l.data);
}

TEST_CASE("extract_patches: short axis is reflect-padded to one full patch") {
    Shape s{32, 32, 20};
    Volume v(s);
    for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = float(i % 97);
    BinaryMask l(s);
    auto patches = extract_patches(v, l, {32, 32, 32}, 32);
    REQUIRE(patches.size() == 1);
    for (int k = 0; k < 12; ++k)
        CHECK(patches[0].image.at(5, 5, 20 + k) == v.at(5, 5, 19 - k));
}

TEST_CASE("extract_patches: count formula") {
    Shape s{64, 64, 64};
    Volume v(s, 0.f);
    BinaryMask l(s);
    CHECK(extract_patches(v, l, {32, 32, 32}, 32).size() == 8);

    // Non-divisible extent: ceil((50-32)/16)+1 = 3 starts on the z axis.
    Volume v2({50, 32, 32}, 0.f);
    BinaryMask l2({50, 32, 32});
    auto p2 = extract_patches(v2, l2, {32, 32, 32}, 16);
    CHECK(p2.size() == 3);
    CHECK(p2.back().origin[0] == 18);  // clamped to extent - target
}

TEST_CASE("extract_patches: disjoint tiles reconstruct the volume when stride == target") {
    Shape s{16, 16, 16};
    Volume v(s);
    Rng rng(7, 0);
    for (auto& x : v.data) x = float(rng.uniform());
    BinaryMask l(s);
    auto patches = extract_patches(v, l, {8, 8, 8}, 8);
    REQUIRE(patches.size() == 8);
    Volume rebuilt(s, -1.f);
    for (const auto& p : patches)
        for (int z = 0; z < 8; ++z)
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    rebuilt.at(p.origin[0] + z, p.origin[1] + y, p.origin[2] + x) =
                        p.image.at(z, y, x);
    CHECK(rebuilt.data == v.data);
}
