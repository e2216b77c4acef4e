#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vforge/ops.hpp"
#include "vforge/reference.hpp"
#include "vforge/rng.hpp"

using namespace vforge;

namespace {

bool is_subset(const BinaryMask& a, const BinaryMask& b) {
    for (size_t i = 0; i < a.data.size(); ++i)
        if (a.data[i] && !b.data[i]) return false;
    return true;
}

// A voxel whose full 3x3x3 neighborhood is foreground marks a thick spot.
bool has_fully_interior_voxel(const BinaryMask& m) {
    const Shape s = m.shape;
    for (int z = 1; z + 1 < s.d; ++z)
        for (int y = 1; y + 1 < s.h; ++y)
            for (int x = 1; x + 1 < s.w; ++x) {
                bool full = true;
                for (int dz = -1; dz <= 1 && full; ++dz)
                    for (int dy = -1; dy <= 1 && full; ++dy)
                        for (int dx = -1; dx <= 1 && full; ++dx)
                            if (!m.at(z + dz, y + dy, x + dx)) full = false;
                if (full) return true;
            }
    return false;
}

BinaryMask solid_tube(Shape s, int r, int length) {
    BinaryMask m(s);
    int cz = s.d / 2, cy = s.h / 2, x0 = (s.w - length) / 2;
    for (int z = cz - r; z <= cz + r; ++z)
        for (int y = cy - r; y <= cy + r; ++y)
            for (int x = x0; x < x0 + length; ++x) m.at(z, y, x) = 1;
    return m;
}

}  // namespace

TEST_CASE("skeletonize: empty mask stays empty") {
    BinaryMask m({6, 6, 6});
    CHECK(count_foreground(ops::skeletonize(m)) == 0);
}

TEST_CASE("skeletonize: a one-voxel-thick line is already its own skeleton") {
    BinaryMask m({5, 5, 20});
    for (int x = 2; x < 18; ++x) m.at(2, 2, x) = 1;
    BinaryMask s = ops::skeletonize(m);
    CHECK(s.data == m.data);
}

TEST_CASE("skeletonize: solid tube reduces to a thin connected centerline") {
    BinaryMask tube = solid_tube({11, 11, 26}, 2, 20);  // 5x5 cross-section, length 20
    BinaryMask skel = ops::skeletonize(tube);

    CHECK(count_foreground(skel) > 0);
    CHECK(is_subset(skel, tube));
    CHECK_FALSE(has_fully_interior_voxel(skel));
    CHECK(serial::component_count(skel, 26) == serial::component_count(tube, 26));
    // Idempotent after convergence.
    CHECK(ops::skeletonize(skel).data == skel.data);
    // The centerline should be a small fraction of the tube volume.
    CHECK(count_foreground(skel) < count_foreground(tube) / 5);
}

TEST_CASE("skeletonize: connectivity count preserved on random blobs") {
    for (uint64_t seed : {3u, 7u, 13u}) {
        Rng rng(seed, 0);
        BinaryMask m({12, 12, 12});
        // A few dilated random balls produce blobs of varying topology.
        for (int k = 0; k < 4; ++k) {
            int z = int(rng.uniform_int(2, 9)), y = int(rng.uniform_int(2, 9)),
                x = int(rng.uniform_int(2, 9));
            m.at(z, y, x) = 1;
        }
        m = ops::dilate(m, 2);
        BinaryMask s = ops::skeletonize(m);
        CHECK(is_subset(s, m));
        CHECK(serial::component_count(s, 26) == serial::component_count(m, 26));
        CHECK(ops::skeletonize(s).data == s.data);
    }
}

TEST_CASE("skeletonize: isolated voxels survive") {
    BinaryMask m({5, 5, 5});
    m.at(2, 2, 2) = 1;
    CHECK(ops::skeletonize(m).data == m.data);
}
