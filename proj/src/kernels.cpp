#include "vforge/kernels.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace vforge::kernels {

std::vector<float> gaussian_kernel(float sigma) {
    if (sigma <= 0.f) return {1.f};
    int radius = int(std::ceil(4.0 * sigma));
    std::vector<float> k(size_t(2 * radius + 1));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * double(i) * i / (double(sigma) * sigma));
        k[size_t(i + radius)] = float(v);
        total += v;
    }
    for (auto& v : k) v = float(v / total);
    // Nudge the center tap so the kernel sums to exactly 1 in float.
    float s = 0.f;
    for (float v : k) s += v;
    k[size_t(radius)] += 1.f - s;
    return k;
}

void correlate_axis(const float* in, float* out, Shape s, int axis,
                    const float* kernel, int radius) {
    const int d = s.d, h = s.h, w = s.w;
    const int64_t stride = axis == 0 ? int64_t(h) * w : (axis == 1 ? w : 1);
    const int n = s[axis];

    if (radius == 0) {
        std::copy(in, in + s.voxels(), out);
        return;
    }

#pragma omp parallel for schedule(static)
    for (int z = 0; z < d; ++z) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int64_t base = (int64_t(z) * h + y) * w + x;
                const int pos = axis == 0 ? z : (axis == 1 ? y : x);
                const int64_t line0 = base - int64_t(pos) * stride;
                double acc = 0.0;
                if (pos >= radius && pos + radius < n) {
                    const float* p = in + base - int64_t(radius) * stride;
                    for (int i = 0; i <= 2 * radius; ++i, p += stride)
                        acc += double(kernel[i]) * *p;
                } else {
                    for (int i = -radius; i <= radius; ++i) {
                        int j = reflect_index(pos + i, n);
                        acc += double(kernel[i + radius]) * in[line0 + int64_t(j) * stride];
                    }
                }
                out[base] = float(acc);
            }
        }
    }
}

void gaussian_smooth_inplace(Volume& v, float sigma_z, float sigma_y, float sigma_x) {
    std::vector<float> tmp(v.data.size());
    const float sigmas[3] = {sigma_z, sigma_y, sigma_x};
    float* src = v.data.data();
    float* dst = tmp.data();
    for (int axis = 0; axis < 3; ++axis) {
        if (sigmas[axis] <= 0.f) continue;
        auto k = gaussian_kernel(sigmas[axis]);
        int radius = int(k.size() / 2);
        correlate_axis(src, dst, v.shape, axis, k.data(), radius);
        std::swap(src, dst);
    }
    if (src != v.data.data()) v.data.assign(src, src + v.shape.voxels());
}

namespace {

template <bool kMax>
void slide_extreme(const uint8_t* in, uint8_t* out, Shape s, int axis, int radius,
                   uint8_t border) {
    const int d = s.d, h = s.h, w = s.w;
    const int64_t stride = axis == 0 ? int64_t(h) * w : (axis == 1 ? w : 1);
    const int n = s[axis];

    if (radius == 0) {
        std::copy(in, in + s.voxels(), out);
        return;
    }

#pragma omp parallel for schedule(static)
    for (int z = 0; z < d; ++z) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int64_t base = (int64_t(z) * h + y) * w + x;
                const int pos = axis == 0 ? z : (axis == 1 ? y : x);
                const int64_t line0 = base - int64_t(pos) * stride;
                uint8_t acc = kMax ? 0 : 1;
                for (int i = -radius; i <= radius; ++i) {
                    int j = pos + i;
                    uint8_t v = (j < 0 || j >= n) ? border : in[line0 + int64_t(j) * stride];
                    if (kMax) {
                        if (v) { acc = 1; break; }
                    } else {
                        if (!v) { acc = 0; break; }
                    }
                }
                out[base] = acc;
            }
        }
    }
}

}  // namespace

void slide_max_axis(const uint8_t* in, uint8_t* out, Shape s, int axis, int radius) {
    slide_extreme<true>(in, out, s, axis, radius, 0);
}

void slide_min_axis(const uint8_t* in, uint8_t* out, Shape s, int axis, int radius,
                    uint8_t border) {
    slide_extreme<false>(in, out, s, axis, radius, border);
}

float sample_trilinear(const Volume& v, float z, float y, float x) {
    int z0 = int(std::floor(z)), y0 = int(std::floor(y)), x0 = int(std::floor(x));
    float fz = z - float(z0), fy = y - float(y0), fx = x - float(x0);
    int zi[2] = {reflect_index(z0, v.shape.d), reflect_index(z0 + 1, v.shape.d)};
    int yi[2] = {reflect_index(y0, v.shape.h), reflect_index(y0 + 1, v.shape.h)};
    int xi[2] = {reflect_index(x0, v.shape.w), reflect_index(x0 + 1, v.shape.w)};
    float wz[2] = {1.f - fz, fz}, wy[2] = {1.f - fy, fy}, wx[2] = {1.f - fx, fx};
    float acc = 0.f;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                float wgt = wz[a] * wy[b] * wx[c];
                if (wgt != 0.f) acc += wgt * v.at(zi[a], yi[b], xi[c]);
            }
    return acc;
}

float sample_nearest(const Volume& v, float z, float y, float x) {
    int zi = reflect_index(int(std::lround(z)), v.shape.d);
    int yi = reflect_index(int(std::lround(y)), v.shape.h);
    int xi = reflect_index(int(std::lround(x)), v.shape.w);
    return v.at(zi, yi, xi);
}

uint8_t sample_nearest(const BinaryMask& m, float z, float y, float x) {
    int zi = reflect_index(int(std::lround(z)), m.shape.d);
    int yi = reflect_index(int(std::lround(y)), m.shape.h);
    int xi = reflect_index(int(std::lround(x)), m.shape.w);
    return m.at(zi, yi, xi);
}

namespace {
std::mutex g_fftw_mutex;
}

void fft3(const std::complex<float>* in, std::complex<float>* out, Shape s, bool inverse) {
    fftwf_plan plan;
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        plan = fftwf_plan_dft_3d(
            s.d, s.h, s.w,
            reinterpret_cast<fftwf_complex*>(const_cast<std::complex<float>*>(in)),
            reinterpret_cast<fftwf_complex*>(out),
            inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    }
    fftwf_execute(plan);
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fftwf_destroy_plan(plan);
    }
}

double sum(const float* p, const Shape& s) {
    const int64_t plane = int64_t(s.h) * s.w;
    std::vector<double> partial(size_t(s.d), 0.0);
#pragma omp parallel for schedule(static)
    for (int z = 0; z < s.d; ++z) {
        double acc = 0.0;
        const float* q = p + int64_t(z) * plane;
        for (int64_t i = 0; i < plane; ++i) acc += q[i];
        partial[size_t(z)] = acc;
    }
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

std::pair<float, float> min_max(const float* p, const Shape& s) {
    const int64_t n = s.voxels();
    float lo = p[0], hi = p[0];
#pragma omp parallel for schedule(static) reduction(min : lo) reduction(max : hi)
    for (int64_t i = 0; i < n; ++i) {
        lo = std::min(lo, p[i]);
        hi = std::max(hi, p[i]);
    }
    return {lo, hi};
}

}  // namespace vforge::kernels
