// Background volumes: geometry variants (non-overlapping spheres, Voronoi
// regions, or none) filled with Perlin noise or plain intensities.

#ifndef VFORGE_BACKGROUND_HPP
#define VFORGE_BACKGROUND_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "vforge/foreground.hpp"  // Range/IntRange
#include "vforge/rng.hpp"
#include "vforge/volume.hpp"

namespace vforge::drand {

enum class GeometryKind { Spheres, Voronoi, None };
const char* geometry_name(GeometryKind kind);

struct PerlinParams {
    IntRange octaves{1, 4};
    double base_freq_lo = 1.0 / 64;  // cycles per voxel, log-uniform draw
    double base_freq_hi = 1.0 / 8;
    float persistence = 0.5f;
};

struct BackgroundSpec {
    std::array<double, 3> geometry_weights{1, 1, 1};  // Spheres, Voronoi, None
    IntRange n_spheres{4, 16};
    Range sphere_radius{4.f, 14.f};
    IntRange n_voronoi_seeds{2, 12};
    double plain_prob = 0.2;  // plain texture vs Perlin
    PerlinParams perlin;
    bool per_region_redraw = true;
    int sphere_trials_factor = 100;  // rejection budget = factor * n
};

struct Sphere {
    float z, y, x, r;
};

struct SphereLayout {
    Shape shape;
    std::vector<int32_t> labels;  // 0 outside, 1..n per sphere
    std::vector<Sphere> placed;   // may be shorter than requested
};

// Rejection-samples pairwise non-overlapping spheres (center distance at
// least the radius sum); may place fewer than n when space runs out.
SphereLayout place_spheres(Shape shape, int n, Range radius, Rng& rng,
                           int trials_factor = 100);

// Every voxel labeled 1..n_seeds by its nearest seed (squared Euclidean,
// ties to the lowest seed index). seeds_out, when given, receives the
// drawn seed positions.
std::vector<int32_t> voronoi_partition(Shape shape, int n_seeds, Rng& rng,
                                       std::vector<std::array<int, 3>>* seeds_out = nullptr);

// Single octave of lattice gradient noise at the given frequency, unscaled
// (zero at lattice-aligned points).
float perlin_raw(uint64_t key, double freq, double z, double y, double x);

// Fractal sum of gradient-noise octaves mapped into [0,1].
Volume perlin_volume(Shape shape, int octaves, double base_freq, float persistence, Rng& rng);

struct BackgroundResult {
    Volume image;
    GeometryKind geometry = GeometryKind::None;
    std::vector<int32_t> region_labels;  // empty for None
    int n_regions = 0;
};

BackgroundResult compose_background(const BackgroundSpec& spec, Shape shape, Rng& rng);

}  // namespace vforge::drand

#endif
