// Low-level data-parallel kernels shared by the higher-level ops.
//
// Everything here is deterministic for a fixed input regardless of the
// OpenMP thread count: per-voxel loops write disjoint outputs and
// floating-point reductions are combined in fixed slice order.
// Boundary handling is half-sample reflection throughout.

#ifndef VFORGE_KERNELS_HPP
#define VFORGE_KERNELS_HPP

#include <complex>
#include <utility>
#include <vector>

#include "vforge/volume.hpp"

namespace vforge::kernels {

// Half-sample symmetric reflection: (c b a | a b c | c b a).
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

// Normalized sampled Gaussian, radius ceil(4*sigma), sums to 1 exactly.
// sigma == 0 yields the identity kernel {1}.
std::vector<float> gaussian_kernel(float sigma);

// Correlation with an odd symmetric kernel along one axis, reflect boundary.
void correlate_axis(const float* in, float* out, Shape s, int axis,
                    const float* kernel, int radius);

// In-place separable Gaussian smoothing with per-axis sigmas.
void gaussian_smooth_inplace(Volume& v, float sigma_z, float sigma_y, float sigma_x);

// Sliding window max/min along one axis (window 2r+1), used by the
// separable cubic dilate/erode. Out-of-range treated as 0 for max and
// as `border` for min.
void slide_max_axis(const uint8_t* in, uint8_t* out, Shape s, int axis, int radius);
void slide_min_axis(const uint8_t* in, uint8_t* out, Shape s, int axis, int radius,
                    uint8_t border);

// Point sampling with reflected coordinates.
float sample_trilinear(const Volume& v, float z, float y, float x);
float sample_nearest(const Volume& v, float z, float y, float x);
uint8_t sample_nearest(const BinaryMask& m, float z, float y, float x);

// Complex 3D FFT (in-order c2c). Inverse is unnormalized; callers divide by
// voxel count. Thread-safe; parallel callers each bring their own buffers.
void fft3(const std::complex<float>* in, std::complex<float>* out, Shape s, bool inverse);

// Deterministic reductions (per-slice partials combined in z order).
double sum(const float* p, const Shape& s);
std::pair<float, float> min_max(const float* p, const Shape& s);

}  // namespace vforge::kernels

#endif
