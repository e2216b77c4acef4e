// Fore/background merging with the intensity-separation rule, the
// nine-stage intensity corruption chain, and the end-to-end generator for
// domain-randomized (image, label) pairs of class 0.

#ifndef VFORGE_COMPOSE_HPP
#define VFORGE_COMPOSE_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "vforge/background.hpp"
#include "vforge/foreground.hpp"
#include "vforge/rng.hpp"
#include "vforge/volume.hpp"

namespace vforge::drand {

enum class MergeMode { Add, Subtract, Replace };
const char* merge_name(MergeMode mode);

struct MergeSpec {
    std::array<double, 3> mode_weights{1, 1, 1};
    float delta = 0.1f;  // intensity separation margin, 0 < delta < 0.5
};

// Mean intensity of a volume (deterministic reduction).
float mean_intensity(const Volume& v);

// Draws I_M uniformly over [0,1] \ [mean(bg)-delta, mean(bg)+delta].
float sample_foreground_intensity(const Volume& bg, float delta, Rng& rng);

// Scales the foreground map so its peak equals i_m, then combines per mode
// (Add/Subtract clamp to [0,1]; Replace overwrites where fg > 0).
Volume merge_with(const Volume& fg, const Volume& bg, MergeMode mode, float i_m);
Volume merge(const Volume& fg, const BinaryMask& label, const Volume& bg,
             const MergeSpec& spec, Rng& rng);

constexpr int kChainStages = 9;
extern const char* const kChainStageNames[kChainStages];

struct IntensityChainSpec {
    float p_bias = 0.3f;
    Range bias_amplitude{0.05f, 0.3f};
    float p_noise = 0.3f;
    Range noise_sigma{0.01f, 0.08f};
    float p_spike = 0.15f;
    IntRange n_spikes{1, 3};
    Range spike_factor{5.f, 20.f};
    float p_contrast = 0.3f;
    Range gamma{0.5f, 2.0f};
    float p_smooth = 0.3f;
    Range smooth_sigma{0.3f, 1.2f};
    float shared_sigma_prob = 0.5f;  // one sigma for all axes vs per-axis
    float p_rician = 0.2f;
    Range rician_sigma{0.01f, 0.08f};
    float p_gibbs = 0.2f;
    Range gibbs_cutoff{0.4f, 0.95f};  // kept fraction of the max radial frequency
    float p_sharpen = 0.2f;
    Range sharpen_alpha{0.3f, 1.5f};
    Range sharpen_sigma{0.5f, 1.5f};
    float p_hist = 0.2f;
    IntRange hist_points{3, 6};
};

// Applies each stage independently with its probability, in the fixed
// order above; the result is brought back to [0,1] (min-max rescale only
// when the range drifted beyond [-0.05, 1.05], else clamp). `applied`
// (when given) receives one flag per stage.
Volume apply_intensity_chain(const Volume& img, const IntensityChainSpec& spec, Rng& rng,
                             std::array<bool, kChainStages>* applied = nullptr);

// Monotone piecewise-linear intensity remap; xs/ys are the full knot lists
// (ascending, including both endpoints). Input sampled after clamping to
// [0,1].
Volume histogram_remap(const Volume& img, const std::vector<float>& xs,
                       const std::vector<float>& ys);

struct DrandConfig {
    uint64_t seed = 0;
    Shape target{128, 128, 128};
    std::string patch_dir;  // empty -> procedural vessel trees
    VesselTreeParams tree;
    SpatialMaskTransformSpec spatial;
    ArtifactParams artifact;
    BackgroundSpec background;
    MergeSpec merge;
    IntensityChainSpec chain;

    // Defaults scaled to a cubic target side (128 reproduces the shipped
    // configuration; the patch bounds scale along).
    static DrandConfig defaults(int target_side = 128);
};

struct DrandMeta {
    uint64_t seed = 0;
    uint64_t index = 0;
    ArtifactKind artifact = ArtifactKind::Identity;
    GeometryKind geometry = GeometryKind::None;
    MergeMode merge = MergeMode::Replace;
    std::array<bool, kChainStages> chain_applied{};
    float i_m = 0.f;
    float i_b_mu = 0.f;
};

struct DrandSample {
    Volume image;       // in [0,1]
    BinaryMask label;   // the pre-artifact synthetic mask
    int class_id = 0;
    DrandMeta meta;
};

// Deterministic in (config.seed, index); pass a PatchSet to substitute
// external mask patches for the procedural generator.
DrandSample generate_drand_pair(const DrandConfig& config, uint64_t index,
                                const PatchSet* patches = nullptr);

}  // namespace vforge::drand

#endif
