#include "vforge/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "vforge/kernels.hpp"

namespace vforge::preprocess {

float percentile(const Volume& v, double pct) {
    std::vector<float> sorted = v.data;
    std::sort(sorted.begin(), sorted.end());
    int64_t n = int64_t(sorted.size());
    int64_t rank = int64_t(std::ceil(pct / 100.0 * double(n)));  // nearest-rank
    rank = std::clamp<int64_t>(rank, 1, n);
    return sorted[size_t(rank - 1)];
}

Volume clip_rescale(const Volume& v, const ClipSpec& spec, bool* constant_input) {
    if (!(spec.low_pct < spec.high_pct))
        throw Error("bad-percentiles", "low percentile must be below high percentile");
    float lo = percentile(v, spec.low_pct);
    float hi = percentile(v, spec.high_pct);
    Volume out(v.shape);
    out.spacing = v.spacing;
    if (constant_input) *constant_input = false;
    if (hi <= lo) {
        if (constant_input) *constant_input = true;
        return out;  // zeros
    }
    const float span = hi - lo;
    const int64_t n = v.shape.voxels();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        out.data[size_t(i)] = (std::clamp(v.data[size_t(i)], lo, hi) - lo) / span;
    return out;
}

namespace {

Shape resampled_shape(Shape s, Spacing src, Spacing target) {
    Shape out;
    for (int a = 0; a < 3; ++a) {
        double scale = double(src[a]) / double(target[a]);
        out[a] = std::max(1, int(std::llround(double(s[a]) * scale)));
    }
    return out;
}

template <typename T>
Grid<T> resample_impl(const Grid<T>& v, Spacing target, ops::Interp interp) {
    if (!v.spacing) throw Error("missing-spacing", "volume has no spacing metadata");
    for (int a = 0; a < 3; ++a)
        if (!(target[a] > 0.f)) throw Error("bad-spacing", "target spacing must be positive");

    Spacing src = *v.spacing;
    Shape os = resampled_shape(v.shape, src, target);
    Grid<T> out(os);
    out.spacing = target;

    // Voxel centers aligned: out center i maps to (i + 0.5) * ratio - 0.5.
    double ratio[3];
    for (int a = 0; a < 3; ++a) ratio[a] = double(target[a]) / double(src[a]);

#pragma omp parallel for schedule(static)
    for (int z = 0; z < os.d; ++z)
        for (int y = 0; y < os.h; ++y)
            for (int x = 0; x < os.w; ++x) {
                float pz = float((z + 0.5) * ratio[0] - 0.5);
                float py = float((y + 0.5) * ratio[1] - 0.5);
                float px = float((x + 0.5) * ratio[2] - 0.5);
                if constexpr (std::is_same_v<T, float>) {
                    out.at(z, y, x) = interp == ops::Interp::Trilinear
                                          ? kernels::sample_trilinear(v, pz, py, px)
                                          : kernels::sample_nearest(v, pz, py, px);
                } else {
                    out.at(z, y, x) = kernels::sample_nearest(v, pz, py, px);
                }
            }
    return out;
}

}  // namespace

Volume resample_spacing(const Volume& v, Spacing target, ops::Interp interp) {
    return resample_impl(v, target, interp);
}

BinaryMask resample_spacing(const BinaryMask& m, Spacing target) {
    return resample_impl(m, target, ops::Interp::Nearest);
}

BinaryMask smooth_labels(const BinaryMask& m, float sigma, float tau) {
    return ops::threshold(ops::gaussian_smooth(to_volume(m), sigma), tau);
}

BinaryMask improve_labels_hr(const Volume& img, const LabelImproveParams& params) {
    Volume median = ops::median_filter(img, params.filter_size);
    BinaryMask mask(img.shape);
    const int64_t n = img.shape.voxels();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        bool local = (img.data[size_t(i)] - median.data[size_t(i)]) > params.intensity_delta;
        bool bright = img.data[size_t(i)] > params.threshold;
        mask.data[size_t(i)] = (local || bright) ? 1 : 0;
    }
    mask = ops::morphological_close(mask);
    return ops::remove_small_components(mask, params.min_component, params.connectivity);
}

namespace {

template <typename T>
Grid<T> pad_impl(const Grid<T>& v, Shape target) {
    Shape os = v.shape;
    for (int a = 0; a < 3; ++a) os[a] = std::max(os[a], target[a]);
    if (os == v.shape) return v;
    for (int a = 0; a < 3; ++a)
        if (target[a] > 2 * v.shape[a])
            throw Error("pad-too-large", "reflective padding cannot exceed the source extent");

    Grid<T> out(os);
    out.spacing = v.spacing;
#pragma omp parallel for schedule(static)
    for (int z = 0; z < os.d; ++z)
        for (int y = 0; y < os.h; ++y)
            for (int x = 0; x < os.w; ++x) {
                int sz = z < v.shape.d ? z : 2 * v.shape.d - 1 - z;
                int sy = y < v.shape.h ? y : 2 * v.shape.h - 1 - y;
                int sx = x < v.shape.w ? x : 2 * v.shape.w - 1 - x;
                out.at(z, y, x) = v.at(sz, sy, sx);
            }
    return out;
}

}  // namespace

Volume reflect_pad_to(const Volume& v, Shape target) { return pad_impl(v, target); }
BinaryMask reflect_pad_to(const BinaryMask& m, Shape target) { return pad_impl(m, target); }

std::vector<Patch> extract_patches(const Volume& v, const BinaryMask& label, Shape target,
                                   int stride, bool reflective_pad) {
    require_same_shape(v.shape, label.shape);
    if (stride < 1) throw Error("bad-stride", "stride must be >= 1");

    Volume img = v;
    BinaryMask lbl = label;
    if (reflective_pad) {
        img = reflect_pad_to(img, target);
        lbl = reflect_pad_to(lbl, target);
    }
    for (int a = 0; a < 3; ++a)
        if (img.shape[a] < target[a])
            throw Error("crop-too-large", "volume smaller than patch target (pad disabled?)");

    std::array<std::vector<int>, 3> starts;
    for (int a = 0; a < 3; ++a) {
        int extent = img.shape[a], t = target[a];
        int count = (extent - t + stride - 1) / stride + 1;
        for (int k = 0; k < count; ++k) starts[size_t(a)].push_back(std::min(k * stride, extent - t));
    }

    std::vector<Patch> out;
    for (int sz : starts[0])
        for (int sy : starts[1])
            for (int sx : starts[2]) {
                Patch p;
                p.origin = {sz, sy, sx};
                p.image = Volume(target);
                p.image.spacing = img.spacing;
                p.label = BinaryMask(target);
                p.label.spacing = img.spacing;
                for (int z = 0; z < target.d; ++z)
                    for (int y = 0; y < target.h; ++y) {
                        const float* src = &img.data[size_t(img.idx(sz + z, sy + y, sx))];
                        std::copy(src, src + target.w, &p.image.data[size_t(p.image.idx(z, y, 0))]);
                        const uint8_t* lsrc = &lbl.data[size_t(lbl.idx(sz + z, sy + y, sx))];
                        std::copy(lsrc, lsrc + target.w,
                                  &p.label.data[size_t(p.label.idx(z, y, 0))]);
                    }
                out.push_back(std::move(p));
            }
    return out;
}

}  // namespace vforge::preprocess
