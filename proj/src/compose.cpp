#include "vforge/compose.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "vforge/kernels.hpp"
#include "vforge/ops.hpp"

namespace vforge::drand {

const char* merge_name(MergeMode mode) {
    switch (mode) {
        case MergeMode::Add: return "add";
        case MergeMode::Subtract: return "subtract";
        case MergeMode::Replace: return "replace";
    }
    return "unknown";
}

const char* const kChainStageNames[kChainStages] = {
    "bias_field", "gauss_noise", "kspace_spike", "contrast", "gauss_smooth",
    "rician",     "gibbs",       "sharpen",      "histogram",
};

float mean_intensity(const Volume& v) {
    return float(kernels::sum(v.data.data(), v.shape) / double(v.shape.voxels()));
}

float sample_foreground_intensity(const Volume& bg, float delta, Rng& rng) {
    float mu = mean_intensity(bg);
    float lo_len = std::max(0.f, mu - delta);          // [0, mu-delta]
    float hi_start = std::min(1.f, mu + delta);
    float hi_len = std::max(0.f, 1.f - hi_start);      // [mu+delta, 1]
    if (lo_len + hi_len <= 0.f)
        throw Error("no-intensity-gap", "excluded interval covers [0,1]");
    float u = rng.uniformf(0.f, lo_len + hi_len);
    return u < lo_len ? u : hi_start + (u - lo_len);
}

Volume merge_with(const Volume& fg, const Volume& bg, MergeMode mode, float i_m) {
    require_same_shape(fg.shape, bg.shape);
    auto [lo, hi] = kernels::min_max(fg.data.data(), fg.shape);
    float scale = hi > 0.f ? i_m / hi : 0.f;

    Volume out(bg.shape);
    out.spacing = bg.spacing;
    const int64_t n = bg.shape.voxels();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        float f = fg.data[size_t(i)] * scale;
        float b = bg.data[size_t(i)];
        float v;
        switch (mode) {
            case MergeMode::Add: v = std::clamp(b + f, 0.f, 1.f); break;
            case MergeMode::Subtract: v = std::clamp(b - f, 0.f, 1.f); break;
            default: v = fg.data[size_t(i)] > 0.f ? f : b; break;
        }
        out.data[size_t(i)] = v;
    }
    return out;
}

Volume merge(const Volume& fg, const BinaryMask& label, const Volume& bg,
             const MergeSpec& spec, Rng& rng) {
    require_same_shape(fg.shape, label.shape);
    float i_m = sample_foreground_intensity(bg, spec.delta, rng);
    MergeMode mode = MergeMode(rng.categorical(spec.mode_weights.data(), 3));
    return merge_with(fg, bg, mode, i_m);
}

namespace {

using cfloat = std::complex<float>;

void to_freq(const Volume& v, std::vector<cfloat>& freq) {
    std::vector<cfloat> in(size_t(v.shape.voxels()));
    for (size_t i = 0; i < in.size(); ++i) in[i] = cfloat(v.data[i], 0.f);
    freq.resize(in.size());
    kernels::fft3(in.data(), freq.data(), v.shape, false);
}

void from_freq(std::vector<cfloat>& freq, Volume& v) {
    std::vector<cfloat> out(freq.size());
    kernels::fft3(freq.data(), out.data(), v.shape, true);
    const float inv = 1.f / float(v.shape.voxels());
    for (size_t i = 0; i < out.size(); ++i) v.data[i] = out[i].real() * inv;
}

void stage_kspace_spike(Volume& img, const IntensityChainSpec& spec, Rng& rng) {
    const Shape s = img.shape;
    std::vector<cfloat> freq;
    to_freq(img, freq);
    int n = spec.n_spikes.draw(rng);
    for (int k = 0; k < n; ++k) {
        int kz = 0, ky = 0, kx = 0;
        for (int tries = 0; tries < 16 && kz == 0 && ky == 0 && kx == 0; ++tries) {
            kz = int(rng.uniform_int(0, s.d - 1));
            ky = int(rng.uniform_int(0, s.h - 1));
            kx = int(rng.uniform_int(0, s.w - 1));
        }
        float factor = spec.spike_factor.draw(rng);
        int64_t i = (int64_t(kz) * s.h + ky) * s.w + kx;
        freq[size_t(i)] *= factor;
        // Mirror bin keeps the signal real.
        int mz = (s.d - kz) % s.d, my = (s.h - ky) % s.h, mx = (s.w - kx) % s.w;
        int64_t j = (int64_t(mz) * s.h + my) * s.w + mx;
        if (j != i) freq[size_t(j)] *= factor;
    }
    from_freq(freq, img);
}

void stage_gibbs(Volume& img, float cutoff) {
    const Shape s = img.shape;
    std::vector<cfloat> freq;
    to_freq(img, freq);
    // Signed frequency index per axis, normalized so the corner has radius 1.
    // Compared in squared space so cutoff 1.0 keeps the corner bins exactly.
    double rmax2 = 0.0;
    for (int a = 0; a < 3; ++a) rmax2 += double(s[a] / 2) * (s[a] / 2);
    rmax2 = std::max(1.0, rmax2);
    const double keep2 = double(cutoff) * double(cutoff) * rmax2;
#pragma omp parallel for schedule(static)
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                int fz = z <= s.d / 2 ? z : z - s.d;
                int fy = y <= s.h / 2 ? y : y - s.h;
                int fx = x <= s.w / 2 ? x : x - s.w;
                double r2 = double(fz) * fz + double(fy) * fy + double(fx) * fx;
                if (r2 > keep2) freq[size_t((int64_t(z) * s.h + y) * s.w + x)] = cfloat(0.f, 0.f);
            }
    from_freq(freq, img);
}

void stage_histogram(Volume& img, int points, Rng& rng) {
    // Monotone remap with fixed (0,0) and (1,1) endpoints.
    std::vector<float> xs(size_t(points), 0.f), ys(size_t(points), 0.f);
    for (auto& v : xs) v = float(rng.uniform());
    for (auto& v : ys) v = float(rng.uniform());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    xs.insert(xs.begin(), 0.f); xs.push_back(1.f);
    ys.insert(ys.begin(), 0.f); ys.push_back(1.f);
    img = histogram_remap(img, xs, ys);
}

// Quadratic polynomial field rescaled into [1-a, 1+a] (same construction as
// the foreground bias artifact).
Volume chain_bias_field(Shape s, float amplitude, Rng& rng) {
    double coef[10];
    for (double& c : coef) c = rng.uniform(-1, 1);
    Volume f(s);
#pragma omp parallel for schedule(static)
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                double nz = s.d > 1 ? 2.0 * z / (s.d - 1) - 1.0 : 0.0;
                double ny = s.h > 1 ? 2.0 * y / (s.h - 1) - 1.0 : 0.0;
                double nx = s.w > 1 ? 2.0 * x / (s.w - 1) - 1.0 : 0.0;
                f.at(z, y, x) = float(coef[0] + coef[1] * nz + coef[2] * ny + coef[3] * nx +
                                      coef[4] * nz * ny + coef[5] * nz * nx + coef[6] * ny * nx +
                                      coef[7] * nz * nz + coef[8] * ny * ny + coef[9] * nx * nx);
            }
    auto [lo, hi] = kernels::min_max(f.data.data(), s);
    float span = hi - lo;
    for (auto& v : f.data)
        v = span > 1e-12f ? 1.f - amplitude + 2.f * amplitude * (v - lo) / span : 1.f;
    return f;
}

}  // namespace

Volume histogram_remap(const Volume& img, const std::vector<float>& xs,
                       const std::vector<float>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw Error("bad-knots", "remap needs matching knot lists of length >= 2");
    Volume out(img.shape);
    out.spacing = img.spacing;
    const int64_t n = img.shape.voxels();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        float v = std::clamp(img.data[size_t(i)], 0.f, 1.f);
        auto it = std::upper_bound(xs.begin(), xs.end(), v);
        size_t hi = std::min(xs.size() - 1, size_t(it - xs.begin()));
        size_t lo = hi == 0 ? 0 : hi - 1;
        float span = xs[hi] - xs[lo];
        float t = span > 0.f ? (v - xs[lo]) / span : 0.f;
        out.data[size_t(i)] = ys[lo] + t * (ys[hi] - ys[lo]);
    }
    return out;
}

Volume apply_intensity_chain(const Volume& img, const IntensityChainSpec& spec, Rng& rng,
                             std::array<bool, kChainStages>* applied) {
    Volume out = img;
    const int64_t n = out.shape.voxels();
    std::array<bool, kChainStages> flags{};

    flags[0] = rng.bernoulli(spec.p_bias);
    if (flags[0]) {
        Volume field = chain_bias_field(out.shape, spec.bias_amplitude.draw(rng), rng);
        for (int64_t i = 0; i < n; ++i) out.data[size_t(i)] *= field.data[size_t(i)];
    }

    flags[1] = rng.bernoulli(spec.p_noise);
    if (flags[1]) {
        float sigma = spec.noise_sigma.draw(rng);
        for (int64_t i = 0; i < n; ++i) out.data[size_t(i)] += float(rng.normal()) * sigma;
    }

    flags[2] = rng.bernoulli(spec.p_spike);
    if (flags[2]) stage_kspace_spike(out, spec, rng);

    flags[3] = rng.bernoulli(spec.p_contrast);
    if (flags[3]) {
        float gamma = spec.gamma.draw(rng);
        for (int64_t i = 0; i < n; ++i)
            out.data[size_t(i)] = std::pow(std::clamp(out.data[size_t(i)], 0.f, 1.f), gamma);
    }

    flags[4] = rng.bernoulli(spec.p_smooth);
    if (flags[4]) {
        float sz, sy, sx;
        if (rng.bernoulli(spec.shared_sigma_prob)) {
            sz = sy = sx = spec.smooth_sigma.draw(rng);
        } else {
            sz = spec.smooth_sigma.draw(rng);
            sy = spec.smooth_sigma.draw(rng);
            sx = spec.smooth_sigma.draw(rng);
        }
        kernels::gaussian_smooth_inplace(out, sz, sy, sx);
    }

    flags[5] = rng.bernoulli(spec.p_rician);
    if (flags[5]) {
        float sigma = spec.rician_sigma.draw(rng);
        for (int64_t i = 0; i < n; ++i) {
            float n1 = out.data[size_t(i)] + float(rng.normal()) * sigma;
            float n2 = float(rng.normal()) * sigma;
            out.data[size_t(i)] = std::sqrt(n1 * n1 + n2 * n2);
        }
    }

    flags[6] = rng.bernoulli(spec.p_gibbs);
    if (flags[6]) stage_gibbs(out, spec.gibbs_cutoff.draw(rng));

    flags[7] = rng.bernoulli(spec.p_sharpen);
    if (flags[7]) {
        float alpha = spec.sharpen_alpha.draw(rng);
        float sigma = spec.sharpen_sigma.draw(rng);
        Volume blur = ops::gaussian_smooth(out, sigma);
        for (int64_t i = 0; i < n; ++i)
            out.data[size_t(i)] += alpha * (out.data[size_t(i)] - blur.data[size_t(i)]);
    }

    flags[8] = rng.bernoulli(spec.p_hist);
    if (flags[8]) stage_histogram(out, spec.hist_points.draw(rng), rng);

    auto [lo, hi] = kernels::min_max(out.data.data(), out.shape);
    if (lo < -0.05f || hi > 1.05f) {
        float span = hi - lo;
        if (span > 1e-12f)
            for (auto& v : out.data) v = (v - lo) / span;
        else
            std::fill(out.data.begin(), out.data.end(), 0.f);
    } else {
        for (auto& v : out.data) v = std::clamp(v, 0.f, 1.f);
    }

    if (applied) *applied = flags;
    return out;
}

DrandConfig DrandConfig::defaults(int target_side) {
    DrandConfig c;
    c.target = {target_side, target_side, target_side};
    c.spatial.crop_target = c.target;
    int bounds = std::max(16, (250 * target_side) / 128);
    c.tree.bounds = {bounds, bounds, bounds};
    // Keep structure sizes roughly proportional below the shipped 128 scale.
    if (target_side < 128) {
        float f = float(target_side) / 128.f;
        c.tree.steps = {std::max(8, int(40 * f)), std::max(16, int(160 * f))};
        c.tree.radius = {1.f, std::max(1.5f, 5.f * f)};
        c.background.sphere_radius = {std::max(2.f, 4.f * f), std::max(4.f, 14.f * f)};
        c.spatial.elastic_spacing = std::max(4, int(16 * f));
    }
    return c;
}

DrandSample generate_drand_pair(const DrandConfig& config, uint64_t index,
                                const PatchSet* patches) {
    Rng rng(config.seed, index);
    DrandSample out;
    out.meta.seed = config.seed;
    out.meta.index = index;

    BinaryMask patch = (patches && !patches->empty()) ? load_patch(*patches, rng)
                                                      : generate_vessel_patch(config.tree, rng);
    out.label = apply_spatial_mask_transforms(patch, config.spatial, rng);

    out.meta.artifact = sample_artifact_kind(config.artifact, rng);
    Volume fg = apply_artifact_transform(out.label, out.meta.artifact, config.artifact, rng);

    BackgroundResult bg = compose_background(config.background, config.target, rng);
    out.meta.geometry = bg.geometry;

    out.meta.i_b_mu = mean_intensity(bg.image);
    out.meta.i_m = sample_foreground_intensity(bg.image, config.merge.delta, rng);
    out.meta.merge = MergeMode(rng.categorical(config.merge.mode_weights.data(), 3));
    Volume img = merge_with(fg, bg.image, out.meta.merge, out.meta.i_m);

    out.image = apply_intensity_chain(img, config.chain, rng, &out.meta.chain_applied);
    out.class_id = 0;
    return out;
}

}  // namespace vforge::drand
