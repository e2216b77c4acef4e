#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "vforge/metrics.hpp"
#include "vforge/sampler.hpp"

using namespace vforge;
using namespace vforge::sampler;

namespace {

std::pair<Volume, BinaryMask> marker_pair(Shape s, float value) {
    Volume v(s, value);
    BinaryMask m(s);
    m.at(s.d / 2, s.h / 2, s.w / 2) = 1;
    return {v, m};
}

std::vector<SourceRegistration> tiny_sources(Shape s) {
    std::vector<SourceRegistration> out;
    SourceRegistration dr;
    dr.kind = SourceKind::Drand;
    dr.count = 5;
    dr.fetch = [s](int64_t idx) { return marker_pair(s, 0.1f + 0.01f * float(idx)); };
    out.push_back(dr);
    for (int cls : {5, 6, 7}) {
        SourceRegistration re;
        re.kind = SourceKind::Real;
        re.class_id = cls;
        re.count = 3;
        re.fetch = [s, cls](int64_t idx) {
            return marker_pair(s, 0.3f + 0.1f * float(cls) + 0.01f * float(idx));
        };
        out.push_back(re);
    }
    SourceRegistration fl;
    fl.kind = SourceKind::Flow;
    fl.class_id = 9;
    fl.count = 2;
    fl.fetch = [s](int64_t idx) { return marker_pair(s, 0.9f + 0.01f * float(idx)); };
    out.push_back(fl);
    return out;
}

}  // namespace

TEST_CASE("source weights validate") {
    SourceWeights ok{0.7, 0.2, 0.1};
    ok.validate();
    CHECK_THROWS_AS((SourceWeights{0.5, 0.2, 0.1}.validate()), Error);
    CHECK_THROWS_AS((SourceWeights{-0.1, 1.0, 0.1}.validate()), Error);
}

TEST_CASE("sample_source: degenerate weights always pick that source") {
    Rng rng(1, 0);
    SourceWeights w{1, 0, 0};
    for (int i = 0; i < 100; ++i) CHECK(sample_source(w, rng) == SourceKind::Drand);
}

TEST_CASE("sample_source: empirical frequencies within 1% at 100k draws") {
    Rng rng(2, 0);
    SourceWeights w{0.7, 0.2, 0.1};
    int counts[3] = {};
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[int(sample_source(w, rng))];
    CHECK(std::abs(double(counts[0]) / n - 0.7) < 0.01);
    CHECK(std::abs(double(counts[1]) / n - 0.2) < 0.01);
    CHECK(std::abs(double(counts[2]) / n - 0.1) < 0.01);
}

TEST_CASE("sample_class: single availability, hard exclusions, uniformity") {
    ClassCatalog one;
    one.classes = {4};
    Rng rng(3, 0);
    for (int i = 0; i < 50; ++i) CHECK(one.sample(rng) == 4);

    ClassCatalog cat;
    for (int c = 1; c <= 23; ++c) cat.classes.insert(c);
    cat.excluded = {1, 2, 3, 4};
    for (int i = 0; i < 10000; ++i) {
        int c = cat.sample(rng);
        CHECK(c >= 5);
        CHECK(c <= 23);
    }

    // 19 available classes, 190k draws, each within 0.5% of 1/19.
    std::map<int, int> counts;
    const int n = 190000;
    for (int i = 0; i < n; ++i) ++counts[cat.sample(rng)];
    for (int c = 5; c <= 23; ++c)
        CHECK(std::abs(double(counts[c]) / n - 1.0 / 19) < 0.005);

    ClassCatalog empty;
    empty.classes = {1};
    empty.excluded = {1};
    CHECK_THROWS_WITH_AS(empty.sample(rng), doctest::Contains("no-classes"), Error);
}

TEST_CASE("augment: collapsed ranges leave the pair unchanged") {
    Shape s{12, 12, 12};
    auto [img, lbl] = marker_pair(s, 0.5f);
    lbl = BinaryMask(s);
    for (int z = 4; z < 8; ++z)
        for (int y = 4; y < 8; ++y)
            for (int x = 4; x < 8; ++x) lbl.at(z, y, x) = 1;

    AugmentationSpec off;
    off.suite = Suite::OfflineTrain;
    off.enable_flips = false;
    off.rotate_deg = {0.f, 0.f};
    off.elastic_magnitude = {0.f, 0.f};
    off.offline_zoom = {1.f, 1.f};
    Rng a(4, 0);
    auto [oi, ol] = augment(img, lbl, off, a);
    CHECK(oi.data == img.data);
    CHECK(ol.data == lbl.data);

    AugmentationSpec fine;
    fine.suite = Suite::FineTune;
    fine.enable_flips = false;
    fine.finetune_zoom = {1.f, 1.f};
    fine.shear = {0.f, 0.f};
    fine.smooth_sigma = {0.f, 0.f};
    fine.noise_prob = 0.f;
    fine.hist_prob = 0.f;
    Rng b(4, 1);
    auto [fi, fl] = augment(img, lbl, fine, b);
    CHECK(fi.data == img.data);
    CHECK(fl.data == lbl.data);
}

TEST_CASE("augment: geometric lockstep between image and label") {
    Shape s{12, 12, 12};
    BinaryMask lbl(s);
    for (int z = 3; z < 9; ++z)
        for (int y = 3; y < 7; ++y)
            for (int x = 5; x < 8; ++x) lbl.at(z, y, x) = 1;
    Volume img = to_volume(lbl);

    // Flip-only suite: permutation, so thresholding the image reproduces
    // the label exactly.
    AugmentationSpec flips;
    flips.suite = Suite::OfflineTrain;
    flips.rotate_deg = {0.f, 0.f};
    flips.elastic_magnitude = {0.f, 0.f};
    flips.offline_zoom = {1.f, 1.f};
    Rng a(5, 0);
    auto [fi, fl] = augment(img, lbl, flips, a);
    BinaryMask thresholded(s);
    for (size_t i = 0; i < fi.data.size(); ++i) thresholded.data[i] = fi.data[i] > 0.5f ? 1 : 0;
    CHECK(metrics::dice(thresholded, fl) == 1.0);

    // Full offline suite: interpolation differences stay small.
    AugmentationSpec full;
    full.suite = Suite::OfflineTrain;
    full.elastic_spacing = 6;
    Rng b(6, 0);
    auto [gi, gl] = augment(img, lbl, full, b);
    BinaryMask thr(s);
    for (size_t i = 0; i < gi.data.size(); ++i) thr.data[i] = gi.data[i] > 0.5f ? 1 : 0;
    CHECK(metrics::dice(thr, gl) >= 0.9);
    for (uint8_t v : gl.data) CHECK((v == 0 || v == 1));
    for (float v : gi.data) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }
}

TEST_CASE("augment: finetune noise is a bounded brightness shift") {
    Shape s{12, 12, 12};
    Volume img(s, 0.4f);
    BinaryMask lbl(s);
    AugmentationSpec fine;
    fine.suite = Suite::FineTune;
    fine.enable_flips = false;
    fine.finetune_zoom = {1.f, 1.f};
    fine.shear = {0.f, 0.f};
    fine.smooth_sigma = {0.f, 0.f};
    fine.noise_prob = 1.f;
    fine.noise_sigma = {0.01f, 0.01f};
    fine.hist_prob = 0.f;
    Rng rng(7, 0);
    auto [out, _] = augment(img, lbl, fine, rng);
    bool changed = false;
    for (size_t i = 0; i < out.data.size(); ++i) {
        float delta = out.data[i] - img.data[i];
        CHECK(std::abs(delta - 0.3f) <= 5 * 0.01f + 1e-4f);
        changed = changed || delta != 0.f;
    }
    CHECK(changed);
}

TEST_CASE("stream: single registered source with weight 1 cycles its indices") {
    Shape s{6, 6, 6};
    std::vector<SourceRegistration> sources;
    SourceRegistration dr;
    dr.kind = SourceKind::Drand;
    dr.count = 4;
    dr.fetch = [s](int64_t idx) { return marker_pair(s, float(idx)); };
    sources.push_back(dr);

    EpochStream stream(sources, {1, 0, 0}, {}, {}, 11);
    for (int round = 0; round < 3; ++round)
        for (int64_t i = 0; i < 4; ++i) {
            StreamItem item = stream.next();
            CHECK(item.provenance.index == i);
            CHECK(item.image.data[0] == float(i));
        }
}

TEST_CASE("stream: identical prefixes under the same seed; seek replays") {
    Shape s{6, 6, 6};
    ClassCatalog cat;
    EpochStream s1(tiny_sources(s), {0.5, 0.3, 0.2}, cat, {}, 77);
    EpochStream s2(tiny_sources(s), {0.5, 0.3, 0.2}, cat, {}, 77);
    auto p1 = s1.provenance_prefix(1000);
    auto p2 = s2.provenance_prefix(1000);
    REQUIRE(p1.size() == p2.size());
    for (size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].kind == p2[i].kind);
        CHECK(p1[i].class_id == p2[i].class_id);
        CHECK(p1[i].index == p2[i].index);
    }

    // Worker-style disjoint materialization: seek to 5 then iterate.
    EpochStream w(tiny_sources(s), {0.5, 0.3, 0.2}, cat, {}, 77);
    w.seek(5);
    StreamItem item = w.next();
    CHECK(item.provenance.position == 5);
    CHECK(item.provenance.kind == p1[5].kind);
    CHECK(item.provenance.index == p1[5].index);
}

TEST_CASE("stream: source frequencies within 1% over 100k positions") {
    Shape s{4, 4, 4};
    EpochStream stream(tiny_sources(s), {0.7, 0.2, 0.1}, {}, {}, 123);
    auto prefix = stream.provenance_prefix(100000);
    int64_t counts[3] = {};
    for (const auto& p : prefix) ++counts[int(p.kind)];
    CHECK(std::abs(double(counts[0]) / 1e5 - 0.7) < 0.01);
    CHECK(std::abs(double(counts[1]) / 1e5 - 0.2) < 0.01);
    CHECK(std::abs(double(counts[2]) / 1e5 - 0.1) < 0.01);
}

TEST_CASE("stream: excluded classes never appear") {
    Shape s{4, 4, 4};
    ClassCatalog cat;
    cat.excluded = {5, 6};
    EpochStream stream(tiny_sources(s), {0.2, 0.6, 0.2}, cat, {}, 9);
    auto prefix = stream.provenance_prefix(20000);
    for (const auto& p : prefix) {
        CHECK(p.class_id != 5);
        CHECK(p.class_id != 6);
        if (p.kind == SourceKind::Real) CHECK(p.class_id == 7);
        if (p.kind == SourceKind::Flow) CHECK(p.class_id == 9);
    }
}

TEST_CASE("stream: only real-origin samples are augmented") {
    Shape s{8, 8, 8};
    EpochStream stream(tiny_sources(s), {0.4, 0.3, 0.3}, {}, {}, 55);
    int real_seen = 0, real_changed = 0;
    for (int k = 0; k < 60; ++k) {
        StreamItem item = stream.next();
        const SourceRegistration* reg = nullptr;
        auto sources = tiny_sources(s);
        for (const auto& candidate : sources)
            if (candidate.kind == item.provenance.kind &&
                (candidate.kind == SourceKind::Drand ||
                 candidate.class_id == item.provenance.class_id))
                reg = &candidate;
        REQUIRE(reg != nullptr);
        auto [raw_img, raw_lbl] = reg->fetch(item.provenance.index);
        if (item.provenance.kind == SourceKind::Real) {
            ++real_seen;
            if (item.image.data != raw_img.data) ++real_changed;
            CHECK(item.provenance.synthetic_origin == false);
        } else {
            CHECK(item.image.data == raw_img.data);
            CHECK(item.label.data == raw_lbl.data);
            if (item.provenance.kind == SourceKind::Flow)
                CHECK(item.provenance.synthetic_origin);
        }
    }
    CHECK(real_seen > 0);
    CHECK(real_changed > 0);
}

TEST_CASE("stream: drawing an unregistered class errors") {
    Shape s{4, 4, 4};
    std::vector<SourceRegistration> sources;
    SourceRegistration re;
    re.kind = SourceKind::Real;
    re.class_id = 3;
    re.count = 0;  // registered but empty
    re.fetch = [s](int64_t) { return marker_pair(s, 0.f); };
    sources.push_back(re);
    EpochStream stream(sources, {0, 1, 0}, {}, {}, 1);
    CHECK_THROWS_WITH_AS(stream.next(), doctest::Contains("unregistered-source"), Error);
}
