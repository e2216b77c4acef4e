#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "vforge/compose.hpp"
#include "vforge/config.hpp"

using namespace vforge;
using namespace vforge::drand;

namespace {

uint64_t bytes_hash(const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xCBF29CE484222325ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

IntensityChainSpec all_off() {
    IntensityChainSpec s;
    s.p_bias = s.p_noise = s.p_spike = s.p_contrast = s.p_smooth = 0.f;
    s.p_rician = s.p_gibbs = s.p_sharpen = s.p_hist = 0.f;
    return s;
}

DrandConfig collapsed_config() {
    DrandConfig c = DrandConfig::defaults(24);
    c.seed = 404;
    c.tree.bounds = {24, 24, 24};
    c.tree.min_fraction = 0.f;
    c.tree.max_fraction = 1.f;
    c.spatial.crop_target = {24, 24, 24};
    c.spatial.flip_rotate = false;
    c.spatial.dilation_radius = {0, 0};
    c.spatial.zoom = {1.f, 1.f};
    c.spatial.elastic_magnitude = {0.f, 0.f};
    c.spatial.smooth_sigma = {0.f, 0.f};
    c.artifact.weights = {0, 0, 0, 0, 0, 0, 1};  // identity only
    c.background.geometry_weights = {0, 0, 1};   // none
    c.background.plain_prob = 1.0;               // plain intensity
    c.merge.mode_weights = {0, 0, 1};            // replace
    c.chain = all_off();
    return c;
}

}  // namespace

TEST_CASE("sample_foreground_intensity respects the exclusion interval") {
    Volume bg({8, 8, 8}, 0.5f);
    Rng rng(1, 0);
    for (int i = 0; i < 500; ++i) {
        float v = sample_foreground_intensity(bg, 0.1f, rng);
        CHECK((v <= 0.4f || v >= 0.6f));
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }

    Volume dark({8, 8, 8}, 0.0f);
    for (int i = 0; i < 500; ++i) {
        float v = sample_foreground_intensity(dark, 0.1f, rng);
        CHECK(v >= 0.1f);
        CHECK(v <= 1.f);
    }
}

TEST_CASE("sample_foreground_intensity is uniform over the allowed segments") {
    Volume bg({8, 8, 8}, 0.5f);
    Rng rng(2, 0);
    // Allowed mass: [0,0.4] and [0.6,1], total 0.8; 8 bins of width 0.1.
    int bins[8] = {};
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        float v = sample_foreground_intensity(bg, 0.1f, rng);
        float folded = v <= 0.4f ? v : v - 0.2f;  // fold out the gap
        int b = std::min(7, int(folded / 0.1f));
        ++bins[b];
    }
    for (int b = 0; b < 8; ++b) CHECK(std::abs(double(bins[b]) / n - 0.125) < 0.02);
}

TEST_CASE("merge: empty foreground returns the background for every mode") {
    Volume fg({6, 6, 6}, 0.f);
    Volume bg({6, 6, 6}, 0.42f);
    for (MergeMode mode : {MergeMode::Add, MergeMode::Subtract, MergeMode::Replace}) {
        Volume out = merge_with(fg, bg, mode, 0.9f);
        CHECK(out.data == bg.data);
    }
}

TEST_CASE("merge: replace puts i_m on the label and leaves background alone") {
    BinaryMask label({6, 6, 6});
    label.at(3, 3, 3) = label.at(3, 3, 4) = 1;
    Volume fg = to_volume(label);
    Volume bg({6, 6, 6}, 0.5f);
    Volume out = merge_with(fg, bg, MergeMode::Replace, 0.9f);
    for (int64_t i = 0; i < out.shape.voxels(); ++i)
        CHECK(out.data[size_t(i)] == (label.data[size_t(i)] ? 0.9f : 0.5f));
}

TEST_CASE("merge: add clamps at 1 on the foreground") {
    BinaryMask label({6, 6, 6});
    label.at(2, 2, 2) = 1;
    Volume fg = to_volume(label);
    Volume bg({6, 6, 6}, 0.8f);
    Volume out = merge_with(fg, bg, MergeMode::Add, 0.9f);
    for (int64_t i = 0; i < out.shape.voxels(); ++i) {
        float expect = label.data[size_t(i)] ? 1.0f : 0.8f;  // 0.8+0.9 clamped
        CHECK(out.data[size_t(i)] == expect);
    }
    CHECK(out.shape == bg.shape);
}

TEST_CASE("merge: shape mismatch errors") {
    Volume fg({4, 4, 4}, 0.f), bg({5, 5, 5}, 0.5f);
    CHECK_THROWS_AS(merge_with(fg, bg, MergeMode::Add, 0.5f), Error);
}

TEST_CASE("intensity chain: all probabilities 0 is the identity") {
    Rng init(3, 0);
    Volume img({10, 10, 10});
    for (auto& v : img.data) v = float(init.uniform());
    Rng rng(3, 1);
    std::array<bool, kChainStages> applied{};
    Volume out = apply_intensity_chain(img, all_off(), rng, &applied);
    CHECK(out.data == img.data);
    for (bool b : applied) CHECK_FALSE(b);
}

TEST_CASE("intensity chain: gibbs with cutoff 1 keeps the image within 1e-5") {
    Rng init(4, 0);
    Volume img({16, 16, 16});
    for (auto& v : img.data) v = float(init.uniform());
    IntensityChainSpec spec = all_off();
    spec.p_gibbs = 1.f;
    spec.gibbs_cutoff = {1.f, 1.f};
    Rng rng(4, 1);
    Volume out = apply_intensity_chain(img, spec, rng);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(out.data[i] - img.data[i]) < 1e-5f);
}

TEST_CASE("intensity chain: rician with zero sigma leaves non-negative input unchanged") {
    Rng init(5, 0);
    Volume img({8, 8, 8});
    for (auto& v : img.data) v = float(init.uniform());
    IntensityChainSpec spec = all_off();
    spec.p_rician = 1.f;
    spec.rician_sigma = {0.f, 0.f};
    Rng rng(5, 1);
    Volume out = apply_intensity_chain(img, spec, rng);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
}

TEST_CASE("histogram remap with identity knots is the identity") {
    Rng init(6, 0);
    Volume img({8, 8, 8});
    for (auto& v : img.data) v = float(init.uniform());
    std::vector<float> knots = {0.f, 0.25f, 0.7f, 1.f};
    Volume out = histogram_remap(img, knots, knots);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
}

TEST_CASE("intensity chain: k-space spikes change the image but keep it finite") {
    Rng init(7, 0);
    Volume img({12, 12, 12});
    for (auto& v : img.data) v = float(init.uniform());
    IntensityChainSpec spec = all_off();
    spec.p_spike = 1.f;
    Rng rng(7, 1);
    Volume out = apply_intensity_chain(img, spec, rng);
    CHECK(out.data != img.data);
    for (float v : out.data) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }
}

TEST_CASE("generate_drand_pair: bitwise reproducible and index-sensitive") {
    DrandConfig cfg = DrandConfig::defaults(24);
    cfg.seed = 31337;
    cfg.tree.bounds = {32, 32, 32};
    cfg.spatial.crop_target = {24, 24, 24};
    cfg.spatial.elastic_spacing = 8;

    DrandSample a = generate_drand_pair(cfg, 5);
    DrandSample b = generate_drand_pair(cfg, 5);
    CHECK(a.image.data == b.image.data);
    CHECK(a.label.data == b.label.data);
    CHECK(a.class_id == 0);

    std::set<uint64_t> hashes;
    for (uint64_t i = 0; i < 100; ++i) {
        DrandSample s = generate_drand_pair(cfg, i);
        hashes.insert(bytes_hash(s.image.data.data(), s.image.data.size() * 4));
    }
    CHECK(hashes.size() == 100);
}

TEST_CASE("generate_drand_pair: collapsed config matches the hand-composed structure") {
    DrandConfig cfg = collapsed_config();
    for (uint64_t idx : {0u, 1u, 2u}) {
        DrandSample s = generate_drand_pair(cfg, idx);
        REQUIRE(s.meta.artifact == ArtifactKind::Identity);
        REQUIRE(s.meta.geometry == GeometryKind::None);
        REQUIRE(s.meta.merge == MergeMode::Replace);

        // Image must be exactly i_m on the label and one constant elsewhere.
        float bg_value = -1.f;
        for (int64_t i = 0; i < s.image.shape.voxels(); ++i) {
            if (s.label.data[size_t(i)]) {
                CHECK(s.image.data[size_t(i)] == s.meta.i_m);
            } else {
                if (bg_value < 0.f) bg_value = s.image.data[size_t(i)];
                CHECK(s.image.data[size_t(i)] == bg_value);
            }
        }
        CHECK(std::abs(s.meta.i_m - s.meta.i_b_mu) >= cfg.merge.delta - 1e-6f);
    }
}

TEST_CASE("drand config round-trips losslessly through JSON") {
    DrandConfig cfg = DrandConfig::defaults(64);
    cfg.seed = 99;
    cfg.patch_dir = "/some/dir";
    cfg.merge.delta = 0.2f;
    cfg.chain.p_gibbs = 0.45f;
    cfg.artifact.weights = {2, 1, 1, 1, 1, 1, 0};
    auto j1 = config::to_json(cfg);
    DrandConfig back = config::drand_from_json(j1);
    auto j2 = config::to_json(back);
    CHECK(j1 == j2);
    CHECK(config::content_hash(j1) == config::content_hash(j2));

    // A different seed changes the hash.
    cfg.seed = 100;
    CHECK(config::content_hash(config::to_json(cfg)) != config::content_hash(j1));
}

TEST_CASE("generate_drand_pair: separation rule holds before the chain") {
    DrandConfig cfg = DrandConfig::defaults(16);
    cfg.seed = 8;
    cfg.tree.bounds = {24, 24, 24};
    cfg.spatial.crop_target = {16, 16, 16};
    cfg.spatial.elastic_spacing = 8;
    for (uint64_t i = 0; i < 40; ++i) {
        DrandSample s = generate_drand_pair(cfg, i);
        CHECK(std::abs(s.meta.i_m - s.meta.i_b_mu) >= cfg.merge.delta - 1e-6f);
        for (float v : s.image.data) {
            CHECK(v >= 0.f);
            CHECK(v <= 1.f);
        }
        for (uint8_t b : s.label.data) CHECK((b == 0 || b == 1));
    }
}
