#include "vforge/foreground.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>

#include "vforge/kernels.hpp"
#include "vforge/nifti.hpp"

namespace vforge::drand {

namespace {

struct Vec3 {
    double z, y, x;
};

Vec3 normalized(Vec3 v) {
    double n = std::sqrt(v.z * v.z + v.y * v.y + v.x * v.x);
    if (n < 1e-12) return {0, 0, 1};
    return {v.z / n, v.y / n, v.x / n};
}

Vec3 random_unit(Rng& rng) {
    // Marsaglia-style rejection inside the unit ball.
    for (;;) {
        Vec3 v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        double n2 = v.z * v.z + v.y * v.y + v.x * v.x;
        if (n2 > 1e-4 && n2 <= 1.0) return normalized(v);
    }
}

void stamp_ball(BinaryMask& m, const Vec3& pos, float radius) {
    int cz = int(std::lround(pos.z)), cy = int(std::lround(pos.y)), cx = int(std::lround(pos.x));
    if (radius <= 1.f) {
        if (m.in_bounds(cz, cy, cx)) m.at(cz, cy, cx) = 1;
        return;
    }
    int r = int(std::ceil(radius));
    float r2 = radius * radius;
    for (int dz = -r; dz <= r; ++dz)
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                if (float(dz * dz + dy * dy + dx * dx) >= r2) continue;
                int z = cz + dz, y = cy + dy, x = cx + dx;
                if (m.in_bounds(z, y, x)) m.at(z, y, x) = 1;
            }
}

struct Branch {
    Vec3 pos, dir;
    float radius;
    int steps;
};

void grow_tree(BinaryMask& m, const VesselTreeParams& p, Rng& rng) {
    const Shape s = m.shape;
    std::deque<Branch> queue;

    Vec3 start{rng.uniform(0.15 * s.d, 0.85 * s.d), rng.uniform(0.15 * s.h, 0.85 * s.h),
               rng.uniform(0.15 * s.w, 0.85 * s.w)};
    queue.push_back({start, random_unit(rng), p.radius.draw(rng), p.steps.draw(rng)});

    int branches = 1;
    while (!queue.empty()) {
        Branch b = queue.front();
        queue.pop_front();
        float end_radius = std::max(1.f, b.radius * p.taper);
        for (int k = 0; k < b.steps; ++k) {
            float r = b.radius + (end_radius - b.radius) * float(k) / float(std::max(1, b.steps - 1));
            stamp_ball(m, b.pos, r);

            if (p.tortuosity > 0.f) {
                Vec3 jitter{rng.normal() * p.tortuosity, rng.normal() * p.tortuosity,
                            rng.normal() * p.tortuosity};
                b.dir = normalized({b.dir.z + jitter.z, b.dir.y + jitter.y, b.dir.x + jitter.x});
            }
            if (branches < p.max_branches && rng.bernoulli(p.branch_prob)) {
                Vec3 side = normalized({b.dir.z + rng.normal() * 0.8, b.dir.y + rng.normal() * 0.8,
                                        b.dir.x + rng.normal() * 0.8});
                queue.push_back({b.pos, side, std::max(1.f, r * p.taper), p.steps.draw(rng)});
                ++branches;
            }

            // Advance so the dominant axis moves exactly one voxel per step;
            // the rasterized centerline is then a 26-connected digital line.
            double dmax = std::max({std::abs(b.dir.z), std::abs(b.dir.y), std::abs(b.dir.x)});
            Vec3 step{b.dir.z / dmax, b.dir.y / dmax, b.dir.x / dmax};
            Vec3 next{b.pos.z + step.z, b.pos.y + step.y, b.pos.x + step.x};
            // Bounce off the bounds instead of leaving the volume.
            if (next.z < 0 || next.z > s.d - 1) { b.dir.z = -b.dir.z; next.z = b.pos.z - step.z; }
            if (next.y < 0 || next.y > s.h - 1) { b.dir.y = -b.dir.y; next.y = b.pos.y - step.y; }
            if (next.x < 0 || next.x > s.w - 1) { b.dir.x = -b.dir.x; next.x = b.pos.x - step.x; }
            b.pos = next;
        }
    }
}

}  // namespace

BinaryMask generate_vessel_patch(const VesselTreeParams& params, Rng& rng) {
    if (params.bounds.d < 16 || params.bounds.h < 16 || params.bounds.w < 16)
        throw Error("bad-bounds", "vessel patch bounds must be at least 16^3");

    BinaryMask last_nonempty;
    bool have_nonempty = false;
    for (int attempt = 0; attempt < std::max(1, params.max_retries); ++attempt) {
        BinaryMask m(params.bounds);
        int trees = params.n_trees.draw(rng);
        for (int t = 0; t < trees; ++t) grow_tree(m, params, rng);

        int64_t fg = count_foreground(m);
        if (fg == 0) continue;
        double fraction = double(fg) / double(m.shape.voxels());
        if (fraction >= params.min_fraction && fraction <= params.max_fraction) return m;
        last_nonempty = std::move(m);
        have_nonempty = true;
    }
    if (have_nonempty) return last_nonempty;
    throw Error("degenerate-foreground", "vessel tree generation produced an empty mask");
}

PatchSet scan_patch_dir(const std::string& dir) {
    PatchSet set;
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error("bad-patch-dir", "not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string name = e.path().string();
        if (name.ends_with(".nii") || name.ends_with(".nii.gz")) set.files.push_back(name);
    }
    std::sort(set.files.begin(), set.files.end());
    if (set.files.empty()) throw Error("bad-patch-dir", "no volume files in " + dir);
    return set;
}

BinaryMask load_patch(const PatchSet& set, Rng& rng) {
    size_t i = size_t(rng.uniform_int(0, int64_t(set.files.size()) - 1));
    return io::read_mask(set.files[i]);
}

BinaryMask apply_spatial_mask_transforms(const BinaryMask& patch,
                                         const SpatialMaskTransformSpec& spec, Rng& rng) {
    for (int a = 0; a < 3; ++a)
        if (patch.shape[a] < spec.crop_target[a])
            throw Error("crop-too-large", "patch smaller than crop target");

    for (int attempt = 0; attempt < std::max(1, spec.max_retries); ++attempt) {
        std::array<int, 3> center;
        for (int a = 0; a < 3; ++a) {
            int lo = spec.crop_target[a] / 2;
            int hi = std::max(lo, patch.shape[a] - 1 - spec.crop_target[a] / 2);
            center[size_t(a)] = int(rng.uniform_int(lo, hi));
        }
        BinaryMask m = ops::crop(patch, center, spec.crop_target);

        if (spec.flip_rotate) {
            ops::FlipRotate fr;
            fr.flip_z = rng.bernoulli(0.5);
            fr.flip_y = rng.bernoulli(0.5);
            fr.flip_x = rng.bernoulli(0.5);
            fr.rot_axis = int(rng.uniform_int(0, 2));
            fr.rot_count = int(rng.uniform_int(0, 3));
            m = ops::flip_rotate(m, fr);
        }

        int dil = spec.dilation_radius.draw(rng);
        if (dil > 0) m = ops::dilate(m, dil);

        float zf = spec.zoom.draw(rng);
        if (zf != 1.f) m = ops::zoom(m, {zf, zf, zf});

        float mag = spec.elastic_magnitude.draw(rng);
        float sig = spec.elastic_sigma.draw(rng);
        m = ops::elastic_deform(m, spec.elastic_spacing, sig, mag, rng);

        float ssig = spec.smooth_sigma.draw(rng);
        m = ops::threshold(ops::gaussian_smooth(to_volume(m), ssig), spec.smooth_threshold);

        if (count_foreground(m) > 0) return m;
    }
    throw Error("degenerate-foreground", "spatial transforms produced an empty label");
}

const char* artifact_name(ArtifactKind kind) {
    switch (kind) {
        case ArtifactKind::BiasField: return "bias_field";
        case ArtifactKind::GaussNoise: return "gauss_noise";
        case ArtifactKind::GaussSmooth: return "gauss_smooth";
        case ArtifactKind::Dropout: return "dropout";
        case ArtifactKind::Shift: return "shift";
        case ArtifactKind::Hull: return "hull";
        case ArtifactKind::Identity: return "identity";
    }
    return "unknown";
}

ArtifactKind sample_artifact_kind(const ArtifactParams& params, Rng& rng) {
    return ArtifactKind(rng.categorical(params.weights.data(), kArtifactKinds));
}

namespace {

// Random quadratic polynomial over normalized coordinates, min-max rescaled
// into [1-a, 1+a].
Volume polynomial_field(Shape s, float amplitude, Rng& rng) {
    double coef[10];
    for (double& c : coef) c = rng.uniform(-1, 1);
    Volume f(s);
#pragma omp parallel for schedule(static)
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                double nz = s.d > 1 ? 2.0 * z / (s.d - 1) - 1.0 : 0.0;
                double ny = s.h > 1 ? 2.0 * y / (s.h - 1) - 1.0 : 0.0;
                double nx = s.w > 1 ? 2.0 * x / (s.w - 1) - 1.0 : 0.0;
                double v = coef[0] + coef[1] * nz + coef[2] * ny + coef[3] * nx +
                           coef[4] * nz * ny + coef[5] * nz * nx + coef[6] * ny * nx +
                           coef[7] * nz * nz + coef[8] * ny * ny + coef[9] * nx * nx;
                f.at(z, y, x) = float(v);
            }
    auto [lo, hi] = kernels::min_max(f.data.data(), s);
    float span = hi - lo;
    if (span < 1e-12f) {
        std::fill(f.data.begin(), f.data.end(), 1.f);
        return f;
    }
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < s.voxels(); ++i)
        f.data[size_t(i)] = 1.f - amplitude + 2.f * amplitude * (f.data[size_t(i)] - lo) / span;
    return f;
}

}  // namespace

Volume apply_artifact_transform(const BinaryMask& label, ArtifactKind kind,
                                const ArtifactParams& params, Rng& rng) {
    const Shape s = label.shape;
    switch (kind) {
        case ArtifactKind::Identity:
            return to_volume(label);

        case ArtifactKind::BiasField: {
            Volume field = polynomial_field(s, params.bias_amplitude.draw(rng), rng);
            Volume out(s);
            for (int64_t i = 0; i < s.voxels(); ++i)
                out.data[size_t(i)] = label.data[size_t(i)] ? field.data[size_t(i)] : 0.f;
            return out;
        }

        case ArtifactKind::GaussNoise: {
            float sigma = params.noise_sigma.draw(rng);
            Volume out(s);
            for (int64_t i = 0; i < s.voxels(); ++i)
                out.data[size_t(i)] =
                    label.data[size_t(i)] ? std::max(0.f, 1.f + float(rng.normal()) * sigma) : 0.f;
            return out;
        }

        case ArtifactKind::GaussSmooth: {
            float sigma = params.smooth_sigma.draw(rng);
            return ops::gaussian_smooth(to_volume(label), sigma);
        }

        case ArtifactKind::Dropout: {
            Volume out = to_volume(label);
            double target = rng.uniform(0.0, params.dropout_max_fraction);
            int64_t fg_total = count_foreground(label);
            if (fg_total == 0 || target <= 0.0) return out;
            std::vector<int64_t> fg_idx;
            fg_idx.reserve(size_t(fg_total));
            for (int64_t i = 0; i < s.voxels(); ++i)
                if (label.data[size_t(i)]) fg_idx.push_back(i);
            int64_t zeroed = 0;
            for (int blob = 0; blob < 64 && double(zeroed) < target * double(fg_total); ++blob) {
                int64_t c = fg_idx[size_t(rng.uniform_int(0, int64_t(fg_idx.size()) - 1))];
                int cz = int(c / (int64_t(s.h) * s.w));
                int rem = int(c % (int64_t(s.h) * s.w));
                int cy = rem / s.w, cx = rem % s.w;
                int r = params.dropout_blob_radius.draw(rng);
                for (int dz = -r; dz <= r; ++dz)
                    for (int dy = -r; dy <= r; ++dy)
                        for (int dx = -r; dx <= r; ++dx) {
                            if (dz * dz + dy * dy + dx * dx > r * r) continue;
                            int z = cz + dz, y = cy + dy, x = cx + dx;
                            if (!out.in_bounds(z, y, x)) continue;
                            float& v = out.at(z, y, x);
                            if (v > 0.f) { v = 0.f; ++zeroed; }
                        }
            }
            return out;
        }

        case ArtifactKind::Shift: {
            int off[3];
            for (int& o : off) o = int(rng.uniform_int(-params.shift_max, params.shift_max));
            Volume out(s);
#pragma omp parallel for schedule(static)
            for (int z = 0; z < s.d; ++z)
                for (int y = 0; y < s.h; ++y)
                    for (int x = 0; x < s.w; ++x) {
                        int sz = z - off[0], sy = y - off[1], sx = x - off[2];
                        out.at(z, y, x) =
                            label.in_bounds(sz, sy, sx) ? float(label.at(sz, sy, sx)) : 0.f;
                    }
            return out;
        }

        case ArtifactKind::Hull: {
            BinaryMask interior = ops::erode(label, 1);
            Volume out(s);
            for (int64_t i = 0; i < s.voxels(); ++i)
                out.data[size_t(i)] =
                    (label.data[size_t(i)] && !interior.data[size_t(i)]) ? 1.f : 0.f;
            return out;
        }
    }
    throw Error("bad-artifact-kind", "unknown artifact transform");
}

}  // namespace vforge::drand
