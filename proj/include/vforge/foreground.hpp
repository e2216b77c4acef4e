// Synthetic vessel label masks and the image-side foreground.
//
// Vessel trees are grown as branching random walks with tapered radii and
// rasterized as balls around the centerline, standing in for an external
// patch collection; a directory of 3D mask files can be used instead.
// The spatial transform stack turns a patch into a label; a single sampled
// artifact transform turns the label into the foreground intensity map.

#ifndef VFORGE_FOREGROUND_HPP
#define VFORGE_FOREGROUND_HPP

#include <array>
#include <string>
#include <vector>

#include "vforge/ops.hpp"
#include "vforge/rng.hpp"
#include "vforge/volume.hpp"

namespace vforge::drand {

struct Range {
    float lo = 0.f, hi = 0.f;
    float draw(Rng& rng) const { return rng.uniformf(lo, hi); }
};

struct IntRange {
    int lo = 0, hi = 0;
    int draw(Rng& rng) const { return int(rng.uniform_int(lo, hi)); }
};

struct VesselTreeParams {
    IntRange n_trees{2, 6};
    IntRange steps{40, 160};        // walk length per branch (dominant-axis voxels)
    float branch_prob = 0.06f;      // per step
    Range radius{1.5f, 5.f};        // root radius in voxels
    float taper = 0.8f;             // child radius = parent radius * taper
    float tortuosity = 0.25f;       // per-step direction jitter
    Shape bounds{250, 250, 250};
    float min_fraction = 0.005f;    // accepted foreground fraction window
    float max_fraction = 0.15f;
    int max_retries = 10;
    int max_branches = 256;         // per tree, caps the branching recursion
};

BinaryMask generate_vessel_patch(const VesselTreeParams& params, Rng& rng);

// Optional external patch collection (one mask volume per file).
struct PatchSet {
    std::vector<std::string> files;  // sorted
    bool empty() const { return files.empty(); }
};
PatchSet scan_patch_dir(const std::string& dir);
BinaryMask load_patch(const PatchSet& set, Rng& rng);

struct SpatialMaskTransformSpec {
    Shape crop_target{128, 128, 128};
    bool flip_rotate = true;
    IntRange dilation_radius{0, 2};
    Range zoom{0.8f, 1.4f};
    int elastic_spacing = 16;
    Range elastic_sigma{10.f, 20.f};
    Range elastic_magnitude{100.f, 500.f};
    Range smooth_sigma{0.4f, 1.2f};
    float smooth_threshold = 0.5f;
    int max_retries = 3;
};

// Ordered composition: crop -> flip/rotate -> dilate -> zoom -> elastic ->
// smooth+threshold. The result is the label (an element of the synthetic
// mask set). Empty results are retried with fresh draws, then error.
BinaryMask apply_spatial_mask_transforms(const BinaryMask& patch,
                                         const SpatialMaskTransformSpec& spec, Rng& rng);

enum class ArtifactKind { BiasField, GaussNoise, GaussSmooth, Dropout, Shift, Hull, Identity };
constexpr int kArtifactKinds = 7;
const char* artifact_name(ArtifactKind kind);

struct ArtifactParams {
    Range bias_amplitude{0.1f, 0.4f};       // field confined to [1-a, 1+a]
    Range noise_sigma{0.05f, 0.2f};
    Range smooth_sigma{0.5f, 2.f};
    float dropout_max_fraction = 0.3f;
    IntRange dropout_blob_radius{2, 6};
    int shift_max = 2;                      // voxels per axis
    std::array<double, kArtifactKinds> weights{1, 1, 1, 1, 1, 1, 1};
};

ArtifactKind sample_artifact_kind(const ArtifactParams& params, Rng& rng);

// Produces the image-side foreground intensity map; the label itself is
// never modified. Background voxels are 0 except for the Shift halo, which
// moves intensity off the label support by at most shift_max voxels.
Volume apply_artifact_transform(const BinaryMask& label, ArtifactKind kind,
                                const ArtifactParams& params, Rng& rng);

}  // namespace vforge::drand

#endif
