// Serial reference implementations.
//
// These are deliberately naive: brute-force neighborhood scans and dense
// convolutions that are easy to audit. The tests use them as independent
// oracles for the parallel kernels, and the benchmark tool compares both
// paths. Nothing here calls into vforge::kernels.

#ifndef VFORGE_REFERENCE_HPP
#define VFORGE_REFERENCE_HPP

#include <array>
#include <vector>

#include "vforge/volume.hpp"

namespace vforge::serial {

// Full 3D correlation with a (2r+1)^3 kernel (flattened z,y,x), reflect
// boundary, serial triple loop.
Volume convolve_dense(const Volume& v, const std::vector<float>& kernel, int radius);

// Cubic-neighborhood scans.
BinaryMask dilate_scan(const BinaryMask& m, int radius);
BinaryMask erode_scan(const BinaryMask& m, int radius, bool border_fg);
Volume median_scan(const Volume& v, int size);

// Label every voxel with the index (1-based) of its nearest seed,
// squared Euclidean distance, ties to the lowest index.
std::vector<int32_t> nearest_seed_labels(Shape s,
                                         const std::vector<std::array<int, 3>>& seeds);

// Flood-fill component count.
int component_count(const BinaryMask& m, int connectivity);

// Dice by explicit voxel counting (both empty -> 1).
double dice_counted(const BinaryMask& a, const BinaryMask& b);

// Serial separable twins of the parallel kernels, for the benchmark target.
Volume gaussian_smooth(const Volume& v, float sigma);
BinaryMask dilate(const BinaryMask& m, int radius);

}  // namespace vforge::serial

#endif
