// Dataset-conditioning operations: percentile clipping, spacing-aware
// resampling, label smoothing, the bright-structure label repair sequence,
// and patch extraction with reflective padding.

#ifndef VFORGE_PREPROCESS_HPP
#define VFORGE_PREPROCESS_HPP

#include <utility>
#include <vector>

#include "vforge/ops.hpp"
#include "vforge/volume.hpp"

namespace vforge::preprocess {

struct ClipSpec {
    double low_pct = 0.0;
    double high_pct = 98.0;
};

// Nearest-rank percentile over all voxels.
float percentile(const Volume& v, double pct);

// Clamp to [p_low, p_high] then min-max rescale to [0,1]. Constant input
// maps to zeros (sets *constant_input when provided).
Volume clip_rescale(const Volume& v, const ClipSpec& spec, bool* constant_input = nullptr);

// Shape scales by the spacing ratio per axis; requires spacing metadata.
Volume resample_spacing(const Volume& v, Spacing target, ops::Interp interp);
BinaryMask resample_spacing(const BinaryMask& m, Spacing target);

// threshold(gaussian_smooth(mask), tau).
BinaryMask smooth_labels(const BinaryMask& m, float sigma, float tau);

struct LabelImproveParams {
    float intensity_delta = 0.1f;
    float threshold = 0.9f;
    int filter_size = 11;
    int64_t min_component = 64;
    int connectivity = 26;
};

// median -> local-contrast mask -> high-intensity union -> 3x3x3 closing ->
// small-component removal.
BinaryMask improve_labels_hr(const Volume& img, const LabelImproveParams& params);

// Pads the end of each axis shorter than `target` by mirrored slices
// (padded[n + k] = in[n - 1 - k]).
Volume reflect_pad_to(const Volume& v, Shape target);
BinaryMask reflect_pad_to(const BinaryMask& m, Shape target);

struct Patch {
    Volume image;
    BinaryMask label;
    std::array<int, 3> origin{0, 0, 0};  // start voxel in the padded volume
};

// Grid of patches covering the (padded) volume; the last window per axis is
// clamped so patches stay in bounds. Patch count per axis is
// ceil((extent - target)/stride) + 1.
std::vector<Patch> extract_patches(const Volume& v, const BinaryMask& label, Shape target,
                                   int stride, bool reflective_pad = true);

}  // namespace vforge::preprocess

#endif
