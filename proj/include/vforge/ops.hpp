// Geometric and morphological primitives on Volume/BinaryMask.
//
// All ops are pure: inputs are never mutated. Convolutions and warps use
// half-sample reflect boundaries. Mask-valued results are strictly {0,1}.

#ifndef VFORGE_OPS_HPP
#define VFORGE_OPS_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "vforge/rng.hpp"
#include "vforge/volume.hpp"

namespace vforge::ops {

enum class Interp { Nearest, Trilinear };

// Copies the target window centered at `center`; the center is clamped so
// the window stays in bounds. Throws "crop-too-large" if target exceeds the
// source extent on any axis.
Volume crop(const Volume& v, std::array<int, 3> center, Shape target);
BinaryMask crop(const BinaryMask& m, std::array<int, 3> center, Shape target);

struct FlipRotate {
    bool flip_z = false, flip_y = false, flip_x = false;
    int rot_axis = 0;   // axis the rot90 turns about
    int rot_count = 0;  // quarter turns, 0..3
};

// Pure voxel permutation: flips applied first, then rot90 quarter turns.
Volume flip_rotate(const Volume& v, const FlipRotate& fr);
BinaryMask flip_rotate(const BinaryMask& m, const FlipRotate& fr);

// Resamples about the volume center, keeping the original shape
// (zoom in crops, zoom out pads via reflection). Masks always use nearest.
Volume zoom(const Volume& v, std::array<float, 3> factor, Interp interp);
BinaryMask zoom(const BinaryMask& m, std::array<float, 3> factor);

// Cubic structuring element of side 2*radius+1.
BinaryMask dilate(const BinaryMask& m, int radius);
// border_fg: whether out-of-bounds voxels count as foreground.
BinaryMask erode(const BinaryMask& m, int radius, bool border_fg = false);

// Smooth random displacement field in voxel units. Noise is drawn on a
// control grid (one point per `control_spacing` voxels), Gaussian-smoothed
// with `sigma` (in voxels), variance-normalized analytically, and scaled so
// magnitude 100 gives a field of unit standard deviation. Strictly linear
// in `magnitude`.
struct ElasticField {
    Volume dz, dy, dx;
};
ElasticField elastic_field(Shape shape, int control_spacing, float sigma, float magnitude,
                           Rng& rng);

Volume warp(const Volume& v, const ElasticField& field, Interp interp);
BinaryMask warp(const BinaryMask& m, const ElasticField& field);

Volume elastic_deform(const Volume& v, int control_spacing, float sigma, float magnitude,
                      Rng& rng, Interp interp = Interp::Trilinear);
BinaryMask elastic_deform(const BinaryMask& m, int control_spacing, float sigma,
                          float magnitude, Rng& rng);

Volume gaussian_smooth(const Volume& v, float sigma_z, float sigma_y, float sigma_x);
Volume gaussian_smooth(const Volume& v, float sigma);

// out[i] = 1 iff v[i] > tau (strict).
BinaryMask threshold(const Volume& v, float tau);

struct Components {
    Shape shape;
    std::vector<int32_t> labels;  // 0 background, components dense 1..count
    std::vector<int64_t> sizes;   // sizes[k-1] = size of component k
    int count = 0;
};
Components connected_components(const BinaryMask& m, int connectivity);
BinaryMask remove_small_components(const BinaryMask& m, int64_t min_size, int connectivity);

// 3D thinning to a curve skeleton. Deletes simple points in six directional
// subiterations with sequential re-checks, preserving 26-connectivity of the
// foreground; curve endpoints are kept.
BinaryMask skeletonize(const BinaryMask& m);

// Median of the size^3 neighborhood, reflect boundary. Size must be odd.
Volume median_filter(const Volume& v, int size);

// Closing with the 3x3x3 ones element (extensive, idempotent).
BinaryMask morphological_close(const BinaryMask& m);

// Resample about the center: out(p) = in(center + A*(p - center)),
// A row-major 3x3 over (z,y,x) offsets. Shape is preserved.
Volume affine_warp(const Volume& v, const std::array<double, 9>& A, Interp interp);
BinaryMask affine_warp(const BinaryMask& m, const std::array<double, 9>& A);

}  // namespace vforge::ops

#endif
