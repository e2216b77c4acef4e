#include "vforge/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "vforge/compose.hpp"
#include "vforge/ops.hpp"

namespace vforge::sampler {

void SourceWeights::validate() const {
    if (drand < 0 || real < 0 || flow < 0)
        throw Error("bad-weights", "source weights must be non-negative");
    if (std::abs(drand + real + flow - 1.0) > 1e-6)
        throw Error("bad-weights", "source weights must sum to 1");
}

const char* source_name(SourceKind kind) {
    switch (kind) {
        case SourceKind::Drand: return "drand";
        case SourceKind::Real: return "real";
        case SourceKind::Flow: return "flow";
    }
    return "unknown";
}

SourceKind sample_source(const SourceWeights& weights, Rng& rng) {
    weights.validate();
    double w[3] = {weights.drand, weights.real, weights.flow};
    return SourceKind(rng.categorical(w, 3));
}

std::vector<int> ClassCatalog::sampleable() const {
    std::vector<int> out;
    for (int c : classes)
        if (!excluded.count(c)) out.push_back(c);
    return out;
}

int ClassCatalog::sample(Rng& rng) const {
    std::vector<int> avail = sampleable();
    if (avail.empty()) throw Error("no-classes", "every class is excluded");
    if (weight_override.empty()) return avail[size_t(rng.uniform_int(0, int64_t(avail.size()) - 1))];
    std::vector<double> w(avail.size(), 1.0);
    for (size_t i = 0; i < avail.size(); ++i) {
        auto it = weight_override.find(avail[i]);
        if (it != weight_override.end()) w[i] = it->second;
    }
    return avail[size_t(rng.categorical(w.data(), int(avail.size())))];
}

namespace {

// Rotation by small angles about all three axes (out -> in map, so the
// transpose of Rz*Ry*Rx).
std::array<double, 9> rotation_matrix(double az, double ay, double ax) {
    auto mul = [](const std::array<double, 9>& a, const std::array<double, 9>& b) {
        std::array<double, 9> c{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) c[size_t(i * 3 + j)] += a[size_t(i * 3 + k)] * b[size_t(k * 3 + j)];
        return c;
    };
    double cz = std::cos(az), sz = std::sin(az);
    double cy = std::cos(ay), sy = std::sin(ay);
    double cx = std::cos(ax), sx = std::sin(ax);
    // Rotations in the (y,x), (z,x) and (z,y) planes over axes z, y, x.
    std::array<double, 9> Rz{1, 0, 0, 0, cz, -sz, 0, sz, cz};
    std::array<double, 9> Ry{cy, 0, -sy, 0, 1, 0, sy, 0, cy};
    std::array<double, 9> Rx{cx, -sx, 0, sx, cx, 0, 0, 0, 1};
    std::array<double, 9> R = mul(Rz, mul(Ry, Rx));
    // Inverse (transpose) maps output coordinates back to input.
    return {R[0], R[3], R[6], R[1], R[4], R[7], R[2], R[5], R[8]};
}

struct PairRef {
    Volume img;
    BinaryMask lbl;
};

void apply_affine(PairRef& p, const std::array<double, 9>& A) {
    p.img = ops::affine_warp(p.img, A, ops::Interp::Trilinear);
    p.lbl = ops::affine_warp(p.lbl, A);
}

void clamp01(Volume& v) {
    for (auto& x : v.data) x = std::clamp(x, 0.f, 1.f);
}

}  // namespace

std::pair<Volume, BinaryMask> augment(const Volume& image, const BinaryMask& label,
                                      const AugmentationSpec& spec, Rng& rng) {
    require_same_shape(image.shape, label.shape);
    PairRef p{image, label};

    if (spec.suite == Suite::OfflineTrain) {
        if (spec.enable_flips) {
            ops::FlipRotate fr;
            fr.flip_z = rng.bernoulli(0.5);
            fr.flip_y = rng.bernoulli(0.5);
            fr.flip_x = rng.bernoulli(0.5);
            p.img = ops::flip_rotate(p.img, fr);
            p.lbl = ops::flip_rotate(p.lbl, fr);
        }

        const double deg2rad = 3.14159265358979323846 / 180.0;
        double az = spec.rotate_deg.draw(rng) * deg2rad;
        double ay = spec.rotate_deg.draw(rng) * deg2rad;
        double ax = spec.rotate_deg.draw(rng) * deg2rad;
        apply_affine(p, rotation_matrix(az, ay, ax));

        float sig = spec.elastic_sigma.draw(rng);
        float mag = spec.elastic_magnitude.draw(rng);
        auto field = ops::elastic_field(p.img.shape, spec.elastic_spacing, sig, mag, rng);
        p.img = ops::warp(p.img, field, ops::Interp::Trilinear);
        p.lbl = ops::warp(p.lbl, field);

        float zf = spec.offline_zoom.draw(rng);
        p.img = ops::zoom(p.img, {zf, zf, zf}, ops::Interp::Trilinear);
        p.lbl = ops::zoom(p.lbl, {zf, zf, zf});
    } else {
        float zf = spec.finetune_zoom.draw(rng);
        p.img = ops::zoom(p.img, {zf, zf, zf}, ops::Interp::Trilinear);
        p.lbl = ops::zoom(p.lbl, {zf, zf, zf});

        // Shear factor per axis pair; out -> in map is I + s*E.
        std::array<double, 9> A{1, 0, 0, 0, 1, 0, 0, 0, 1};
        const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
        for (const auto& pr : pairs) A[size_t(pr[0] * 3 + pr[1])] = spec.shear.draw(rng);
        apply_affine(p, A);

        if (spec.enable_flips) {
            ops::FlipRotate fr;
            fr.flip_z = rng.bernoulli(0.5);
            fr.flip_y = rng.bernoulli(0.5);
            fr.flip_x = rng.bernoulli(0.5);
            p.img = ops::flip_rotate(p.img, fr);
            p.lbl = ops::flip_rotate(p.lbl, fr);
        }

        float sig = spec.smooth_sigma.draw(rng);
        if (sig > 0.f) p.img = ops::gaussian_smooth(p.img, sig);

        if (rng.bernoulli(spec.noise_prob)) {
            float ns = spec.noise_sigma.draw(rng);
            for (auto& v : p.img.data)
                v += spec.noise_mean + float(rng.normal()) * ns;
        }

        if (rng.bernoulli(spec.hist_prob)) {
            int points = spec.hist_points.draw(rng);
            std::vector<float> xs(size_t(points), 0.f), ys(size_t(points), 0.f);
            for (auto& v : xs) v = float(rng.uniform());
            for (auto& v : ys) v = float(rng.uniform());
            std::sort(xs.begin(), xs.end());
            std::sort(ys.begin(), ys.end());
            xs.insert(xs.begin(), 0.f); xs.push_back(1.f);
            ys.insert(ys.begin(), 0.f); ys.push_back(1.f);
            p.img = drand::histogram_remap(p.img, xs, ys);
        }
    }

    clamp01(p.img);
    for (auto& b : p.lbl.data) b = b ? 1 : 0;
    return {std::move(p.img), std::move(p.lbl)};
}

EpochStream::EpochStream(std::vector<SourceRegistration> sources, SourceWeights weights,
                         ClassCatalog catalog, AugmentationSpec offline, uint64_t seed)
    : sources_(std::move(sources)), weights_(weights), catalog_(std::move(catalog)),
      offline_(offline), seed_(seed) {
    weights_.validate();
    if (sources_.empty()) throw Error("unregistered-source", "no sources registered");
    for (const auto& s : sources_) {
        if (s.kind == SourceKind::Drand) continue;
        if (!catalog_.classes.empty() && !catalog_.classes.count(s.class_id)) continue;
        (s.kind == SourceKind::Real ? real_catalog_ : flow_catalog_).classes.insert(s.class_id);
    }
    real_catalog_.excluded = catalog_.excluded;
    flow_catalog_.excluded = catalog_.excluded;
    real_catalog_.weight_override = catalog_.weight_override;
    flow_catalog_.weight_override = catalog_.weight_override;
}

const SourceRegistration& EpochStream::find(SourceKind kind, int class_id) const {
    for (const auto& s : sources_)
        if (s.kind == kind && (kind == SourceKind::Drand || s.class_id == class_id)) return s;
    throw Error("unregistered-source", std::string(source_name(kind)) + " class " +
                                           std::to_string(class_id) + " is not registered");
}

Provenance EpochStream::draw(int64_t position, std::map<Key, int64_t>& cursors) const {
    Rng rng(seed_, uint64_t(position));
    SourceKind kind = sample_source(weights_, rng);

    Provenance prov;
    prov.kind = kind;
    prov.position = position;
    prov.class_id = kind == SourceKind::Drand
                        ? 0
                        : (kind == SourceKind::Real ? real_catalog_ : flow_catalog_).sample(rng);
    prov.synthetic_origin = kind == SourceKind::Flow;

    const SourceRegistration& src = find(kind, prov.class_id);
    if (src.count <= 0) throw Error("unregistered-source", "source has no samples");
    int64_t& cursor = cursors[Key{kind, prov.class_id}];
    prov.index = cursor % src.count;
    ++cursor;
    return prov;
}

Provenance EpochStream::peek(int64_t position) const {
    std::map<Key, int64_t> cursors;
    Provenance prov;
    for (int64_t k = 0; k <= position; ++k) prov = draw(k, cursors);
    return prov;
}

std::vector<Provenance> EpochStream::provenance_prefix(int64_t n) const {
    std::map<Key, int64_t> cursors;
    std::vector<Provenance> out;
    out.reserve(size_t(n));
    for (int64_t k = 0; k < n; ++k) out.push_back(draw(k, cursors));
    return out;
}

void EpochStream::seek(int64_t position) {
    cursors_.clear();
    for (int64_t k = 0; k < position; ++k) draw(k, cursors_);
    position_ = position;
}

StreamItem EpochStream::next() {
    Provenance prov = draw(position_, cursors_);
    ++position_;

    const SourceRegistration& src = find(prov.kind, prov.class_id);
    auto [img, lbl] = src.fetch(prov.index);

    if (prov.kind == SourceKind::Real) {
        // Continue the position-keyed stream so augmentation draws are
        // reproducible at any position.
        Rng rng(seed_ ^ 0x5EEDAU, uint64_t(prov.position));
        AugmentationSpec spec = offline_;
        spec.suite = Suite::OfflineTrain;
        std::tie(img, lbl) = augment(img, lbl, spec, rng);
    }

    StreamItem item;
    item.image = std::move(img);
    item.label = std::move(lbl);
    item.class_id = prov.class_id;
    item.provenance = prov;
    return item;
}

}  // namespace vforge::sampler
