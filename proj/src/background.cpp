#include "vforge/background.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace vforge::drand {

const char* geometry_name(GeometryKind kind) {
    switch (kind) {
        case GeometryKind::Spheres: return "spheres";
        case GeometryKind::Voronoi: return "voronoi";
        case GeometryKind::None: return "none";
    }
    return "unknown";
}

SphereLayout place_spheres(Shape shape, int n, Range radius, Rng& rng, int trials_factor) {
    SphereLayout out;
    out.shape = shape;
    out.labels.assign(size_t(shape.voxels()), 0);
    if (n <= 0) return out;

    const int max_trials = std::max(1, trials_factor) * n;
    for (int trial = 0; trial < max_trials && int(out.placed.size()) < n; ++trial) {
        float r = radius.draw(rng);
        Sphere cand{rng.uniformf(0.f, float(shape.d - 1)), rng.uniformf(0.f, float(shape.h - 1)),
                    rng.uniformf(0.f, float(shape.w - 1)), r};
        bool ok = true;
        for (const Sphere& p : out.placed) {
            float dz = cand.z - p.z, dy = cand.y - p.y, dx = cand.x - p.x;
            float need = cand.r + p.r;
            if (dz * dz + dy * dy + dx * dx < need * need) { ok = false; break; }
        }
        if (ok) out.placed.push_back(cand);
    }

    for (size_t k = 0; k < out.placed.size(); ++k) {
        const Sphere& sp = out.placed[k];
        int z0 = std::max(0, int(std::floor(sp.z - sp.r))), z1 = std::min(shape.d - 1, int(std::ceil(sp.z + sp.r)));
        int y0 = std::max(0, int(std::floor(sp.y - sp.r))), y1 = std::min(shape.h - 1, int(std::ceil(sp.y + sp.r)));
        int x0 = std::max(0, int(std::floor(sp.x - sp.r))), x1 = std::min(shape.w - 1, int(std::ceil(sp.x + sp.r)));
        float r2 = sp.r * sp.r;
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    float dz = z - sp.z, dy = y - sp.y, dx = x - sp.x;
                    if (dz * dz + dy * dy + dx * dx < r2)
                        out.labels[size_t((int64_t(z) * shape.h + y) * shape.w + x)] =
                            int32_t(k + 1);
                }
    }
    return out;
}

std::vector<int32_t> voronoi_partition(Shape shape, int n_seeds, Rng& rng,
                                       std::vector<std::array<int, 3>>* seeds_out) {
    if (n_seeds < 2) throw Error("bad-seed-count", "voronoi needs at least 2 seeds");
    if (int64_t(n_seeds) > shape.voxels())
        throw Error("bad-seed-count", "more seeds than voxels");

    // Distinct voxel positions.
    std::set<int64_t> chosen;
    std::vector<std::array<int, 3>> seeds;
    while (int(seeds.size()) < n_seeds) {
        int z = int(rng.uniform_int(0, shape.d - 1));
        int y = int(rng.uniform_int(0, shape.h - 1));
        int x = int(rng.uniform_int(0, shape.w - 1));
        int64_t i = (int64_t(z) * shape.h + y) * shape.w + x;
        if (chosen.insert(i).second) seeds.push_back({z, y, x});
    }
    if (seeds_out) *seeds_out = seeds;

    std::vector<int32_t> labels(size_t(shape.voxels()));
#pragma omp parallel for schedule(static)
    for (int z = 0; z < shape.d; ++z)
        for (int y = 0; y < shape.h; ++y)
            for (int x = 0; x < shape.w; ++x) {
                int64_t best = -1;
                int32_t best_label = 0;
                for (size_t k = 0; k < seeds.size(); ++k) {
                    int64_t dz = z - seeds[k][0], dy = y - seeds[k][1], dx = x - seeds[k][2];
                    int64_t d2 = dz * dz + dy * dy + dx * dx;
                    if (best < 0 || d2 < best) {
                        best = d2;
                        best_label = int32_t(k + 1);
                    }
                }
                labels[size_t((int64_t(z) * shape.h + y) * shape.w + x)] = best_label;
            }
    return labels;
}

namespace {

// Twelve edge gradients of the classic lattice noise.
constexpr float kGrad[12][3] = {
    {1, 1, 0}, {-1, 1, 0}, {1, -1, 0}, {-1, -1, 0}, {1, 0, 1}, {-1, 0, 1},
    {1, 0, -1}, {-1, 0, -1}, {0, 1, 1}, {0, -1, 1}, {0, 1, -1}, {0, -1, -1},
};

inline float fade(float t) { return t * t * t * (t * (t * 6.f - 15.f) + 10.f); }

// One gradient-noise octave; grad_at(iz,iy,ix) supplies the lattice
// gradient so the hashed and table-cached paths share the arithmetic.
template <class GradAt>
inline float perlin_eval(const GradAt& grad_at, double freq, double z, double y, double x) {
    double pz = z * freq, py = y * freq, px = x * freq;
    int64_t iz = int64_t(std::floor(pz)), iy = int64_t(std::floor(py)),
            ix = int64_t(std::floor(px));
    float fz = float(pz - double(iz)), fy = float(py - double(iy)), fx = float(px - double(ix));
    float uz = fade(fz), uy = fade(fy), ux = fade(fx);

    auto dot = [&](int64_t gz, int64_t gy, int64_t gx, float dz, float dy, float dx) {
        const float* g = grad_at(gz, gy, gx);
        return g[0] * dz + g[1] * dy + g[2] * dx;
    };
    float c000 = dot(iz, iy, ix, fz, fy, fx);
    float c001 = dot(iz, iy, ix + 1, fz, fy, fx - 1);
    float c010 = dot(iz, iy + 1, ix, fz, fy - 1, fx);
    float c011 = dot(iz, iy + 1, ix + 1, fz, fy - 1, fx - 1);
    float c100 = dot(iz + 1, iy, ix, fz - 1, fy, fx);
    float c101 = dot(iz + 1, iy, ix + 1, fz - 1, fy, fx - 1);
    float c110 = dot(iz + 1, iy + 1, ix, fz - 1, fy - 1, fx);
    float c111 = dot(iz + 1, iy + 1, ix + 1, fz - 1, fy - 1, fx - 1);

    float x00 = c000 + ux * (c001 - c000);
    float x01 = c010 + ux * (c011 - c010);
    float x10 = c100 + ux * (c101 - c100);
    float x11 = c110 + ux * (c111 - c110);
    float y0 = x00 + uy * (x01 - x00);
    float y1 = x10 + uy * (x11 - x10);
    return y0 + uz * (y1 - y0);
}

struct HashedGrad {
    uint64_t key;
    const float* operator()(int64_t iz, int64_t iy, int64_t ix) const {
        return kGrad[hash_coords(key, iz, iy, ix, 0) % 12];
    }
};

// Gradients cached over the lattice window a volume of `shape` touches;
// identical values to HashedGrad, fetched once per lattice point.
struct GradientGrid {
    int n[3] = {0, 0, 0};
    std::vector<float> g;

    void build(uint64_t key, double freq, Shape shape) {
        for (int a = 0; a < 3; ++a)
            n[a] = int(std::floor(double(shape[a] - 1) * freq)) + 2;
        g.resize(size_t(n[0]) * n[1] * n[2] * 3);
        HashedGrad hashed{key};
        for (int iz = 0; iz < n[0]; ++iz)
            for (int iy = 0; iy < n[1]; ++iy)
                for (int ix = 0; ix < n[2]; ++ix) {
                    const float* src = hashed(iz, iy, ix);
                    float* dst = &g[((size_t(iz) * n[1] + iy) * n[2] + ix) * 3];
                    dst[0] = src[0];
                    dst[1] = src[1];
                    dst[2] = src[2];
                }
    }
    const float* operator()(int64_t iz, int64_t iy, int64_t ix) const {
        return &g[((size_t(iz) * n[1] + iy) * n[2] + ix) * 3];
    }
};

}  // namespace

float perlin_raw(uint64_t key, double freq, double z, double y, double x) {
    return perlin_eval(HashedGrad{key}, freq, z, y, x);
}

namespace {

// Octave sum mapped to [0,1] with a fixed affine map; single-octave values
// rarely exceed +-0.7, the clamp catches the tail.
struct FbmTexture {
    uint64_t key;
    int octaves;
    double base_freq;
    float persistence;
    std::vector<GradientGrid> grids;  // one per octave once prepared

    // Octaves past ~1/3 cycle per voxel carry no representable structure;
    // truncating them keeps the gradient lattices small.
    int effective_octaves() const {
        int n = 1;
        double freq = base_freq * 2.0;
        while (n < octaves && freq <= 0.35) {
            ++n;
            freq *= 2.0;
        }
        return n;
    }

    void prepare(Shape shape) {
        int n = effective_octaves();
        grids.resize(size_t(n));
        double freq = base_freq;
        for (int o = 0; o < n; ++o) {
            grids[size_t(o)].build(key + uint64_t(o) * 0x9E3779B97F4A7C15ull, freq, shape);
            freq *= 2.0;
        }
    }

    float eval(double z, double y, double x) const {
        float total = 0.f, amp = 1.f, amp_sum = 0.f;
        double freq = base_freq;
        const int n = effective_octaves();
        for (int o = 0; o < n; ++o) {
            if (!grids.empty())
                total += amp * perlin_eval(grids[size_t(o)], freq, z, y, x);
            else
                total += amp * perlin_raw(key + uint64_t(o) * 0x9E3779B97F4A7C15ull, freq, z, y, x);
            amp_sum += amp;
            amp *= persistence;
            freq *= 2.0;
        }
        float v = 0.5f + 0.5f * total / (0.7f * amp_sum);
        return std::clamp(v, 0.f, 1.f);
    }
};

struct Texture {
    bool plain = false;
    float plain_value = 0.f;
    FbmTexture fbm{};
};

Texture draw_texture(const BackgroundSpec& spec, Rng& rng) {
    Texture t;
    if (rng.bernoulli(spec.plain_prob)) {
        t.plain = true;
        t.plain_value = float(rng.uniform());
        return t;
    }
    t.fbm.key = rng.next_u64();
    t.fbm.octaves = spec.perlin.octaves.draw(rng);
    t.fbm.base_freq = rng.log_uniform(spec.perlin.base_freq_lo, spec.perlin.base_freq_hi);
    t.fbm.persistence = spec.perlin.persistence;
    return t;
}

}  // namespace

Volume perlin_volume(Shape shape, int octaves, double base_freq, float persistence, Rng& rng) {
    if (octaves < 1) throw Error("bad-octaves", "octaves must be >= 1");
    if (base_freq <= 0) throw Error("bad-frequency", "base frequency must be positive");
    FbmTexture tex{rng.next_u64(), octaves, base_freq, persistence, {}};
    tex.prepare(shape);
    Volume out(shape);
#pragma omp parallel for schedule(static)
    for (int z = 0; z < shape.d; ++z)
        for (int y = 0; y < shape.h; ++y)
            for (int x = 0; x < shape.w; ++x) out.at(z, y, x) = tex.eval(z, y, x);
    return out;
}

BackgroundResult compose_background(const BackgroundSpec& spec, Shape shape, Rng& rng) {
    BackgroundResult out;
    out.geometry = GeometryKind(rng.categorical(spec.geometry_weights.data(), 3));

    if (out.geometry == GeometryKind::Spheres) {
        auto layout = place_spheres(shape, spec.n_spheres.draw(rng), spec.sphere_radius, rng,
                                    spec.sphere_trials_factor);
        out.region_labels = std::move(layout.labels);
        out.n_regions = int(layout.placed.size());
    } else if (out.geometry == GeometryKind::Voronoi) {
        int n = spec.n_voronoi_seeds.draw(rng);
        out.region_labels = voronoi_partition(shape, n, rng);
        out.n_regions = n;
    }

    // Texture 0 covers label 0 (everything for None); regions redraw in
    // label order when the flag is set, otherwise all share texture 0.
    std::vector<Texture> textures;
    textures.push_back(draw_texture(spec, rng));
    for (int k = 1; k <= out.n_regions; ++k)
        textures.push_back(spec.per_region_redraw ? draw_texture(spec, rng) : textures.front());
    for (auto& t : textures)
        if (!t.plain) t.fbm.prepare(shape);

    out.image = Volume(shape);
#pragma omp parallel for schedule(static)
    for (int z = 0; z < shape.d; ++z)
        for (int y = 0; y < shape.h; ++y)
            for (int x = 0; x < shape.w; ++x) {
                int64_t i = (int64_t(z) * shape.h + y) * shape.w + x;
                int32_t label = out.region_labels.empty() ? 0 : out.region_labels[size_t(i)];
                const Texture& t = textures[size_t(label)];
                out.image.data[size_t(i)] = t.plain ? t.plain_value : t.fbm.eval(z, y, x);
            }
    return out;
}

}  // namespace vforge::drand
