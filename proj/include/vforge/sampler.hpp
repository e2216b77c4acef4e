// Weighted mixture over the three data sources, near-uniform class
// sampling with exclusions, and the two augmentation suites.

#ifndef VFORGE_SAMPLER_HPP
#define VFORGE_SAMPLER_HPP

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vforge/foreground.hpp"  // Range/IntRange
#include "vforge/rng.hpp"
#include "vforge/volume.hpp"

namespace vforge::sampler {

using drand::IntRange;
using drand::Range;

struct SourceWeights {
    double drand = 0.7, real = 0.2, flow = 0.1;

    // Throws "bad-weights" unless non-negative and summing to 1 (1e-6).
    void validate() const;
};

enum class SourceKind { Drand, Real, Flow };
const char* source_name(SourceKind kind);

SourceKind sample_source(const SourceWeights& weights, Rng& rng);

struct ClassCatalog {
    std::set<int> classes;   // available ids, subset of 1..23
    std::set<int> excluded;  // never sampled

    // Uniform over classes minus excluded; optional per-class weights.
    std::map<int, double> weight_override;

    std::vector<int> sampleable() const;
    int sample(Rng& rng) const;  // throws "no-classes" when empty
};

enum class Suite { OfflineTrain, FineTune };

struct AugmentationSpec {
    Suite suite = Suite::OfflineTrain;
    bool enable_flips = true;

    // OfflineTrain: flips + small rotations, elastic, zoom.
    Range rotate_deg{0.f, 10.f};
    Range elastic_sigma{10.f, 20.f};
    Range elastic_magnitude{100.f, 500.f};
    int elastic_spacing = 16;
    Range offline_zoom{0.9f, 1.3f};

    // FineTune: zoom, shear, flip, smooth, additive noise, histogram shift.
    Range finetune_zoom{1.f, 1.3f};
    Range shear{0.f, 0.4f};
    Range smooth_sigma{0.f, 0.5f};
    float noise_mean = 0.3f;
    Range noise_sigma{0.f, 0.01f};
    float noise_prob = 0.5f;
    float hist_prob = 1.f;
    IntRange hist_points{5, 10};
};

// Geometric transforms move image and label in lockstep (label nearest,
// re-binarized); intensity transforms touch only the image. Output image is
// clamped to [0,1].
std::pair<Volume, BinaryMask> augment(const Volume& image, const BinaryMask& label,
                                      const AugmentationSpec& spec, Rng& rng);

struct SourceRegistration {
    SourceKind kind = SourceKind::Drand;
    int class_id = 0;  // 0 for drand, dataset class otherwise
    int64_t count = 0;
    // fetch(index) -> pair; index in [0, count).
    std::function<std::pair<Volume, BinaryMask>(int64_t)> fetch;
};

struct Provenance {
    SourceKind kind = SourceKind::Drand;
    int class_id = 0;
    int64_t index = 0;     // index within the source (cycled)
    int64_t position = 0;  // stream position
    bool synthetic_origin = false;
};

struct StreamItem {
    Volume image;
    BinaryMask label;
    int class_id = 0;
    Provenance provenance;
};

// Infinite deterministic stream: item k depends only on (seed, k). Source
// kind is drawn by weight, class near-uniformly from the registered classes
// of that kind (catalog exclusions always hold), and the per-(kind, class)
// cursor cycles that source's indices. Only Real-origin samples pass
// through the OfflineTrain augmentation.
class EpochStream {
public:
    EpochStream(std::vector<SourceRegistration> sources, SourceWeights weights,
                ClassCatalog catalog, AugmentationSpec offline, uint64_t seed);

    StreamItem next();
    // Jump to an absolute position (replays the cheap source draws).
    void seek(int64_t position);
    int64_t position() const { return position_; }

    // Source/class/index decision for a position, without materializing.
    Provenance peek(int64_t position) const;
    // First n decisions in O(n), volumes untouched.
    std::vector<Provenance> provenance_prefix(int64_t n) const;

private:
    struct Key {
        SourceKind kind;
        int class_id;
        bool operator<(const Key& o) const {
            return kind != o.kind ? kind < o.kind : class_id < o.class_id;
        }
    };

    Provenance draw(int64_t position, std::map<Key, int64_t>& cursors) const;
    const SourceRegistration& find(SourceKind kind, int class_id) const;

    std::vector<SourceRegistration> sources_;
    SourceWeights weights_;
    ClassCatalog catalog_;
    ClassCatalog real_catalog_, flow_catalog_;  // registered classes per kind
    AugmentationSpec offline_;
    uint64_t seed_;
    int64_t position_ = 0;
    std::map<Key, int64_t> cursors_;
};

}  // namespace vforge::sampler

#endif
