#include "vforge/ops.hpp"

#include <algorithm>
#include <cmath>

#include "vforge/kernels.hpp"

namespace vforge::ops {

using kernels::reflect_index;

namespace {

template <typename T>
Grid<T> crop_impl(const Grid<T>& v, std::array<int, 3> center, Shape target) {
    for (int a = 0; a < 3; ++a)
        if (target[a] > v.shape[a] || target[a] <= 0)
            throw Error("crop-too-large", "target exceeds source extent on axis " + std::to_string(a));
    int start[3];
    for (int a = 0; a < 3; ++a) {
        int s = center[a] - target[a] / 2;
        start[a] = std::clamp(s, 0, v.shape[a] - target[a]);
    }
    Grid<T> out(target);
    out.spacing = v.spacing;
#pragma omp parallel for schedule(static)
    for (int z = 0; z < target.d; ++z)
        for (int y = 0; y < target.h; ++y) {
            const T* src = &v.data[size_t(v.idx(start[0] + z, start[1] + y, start[2]))];
            T* dst = &out.data[size_t(out.idx(z, y, 0))];
            std::copy(src, src + target.w, dst);
        }
    return out;
}

template <typename T>
Grid<T> flip_axis(const Grid<T>& v, int axis) {
    Grid<T> out(v.shape);
    out.spacing = v.spacing;
    const Shape s = v.shape;
#pragma omp parallel for schedule(static)
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                int sz = axis == 0 ? s.d - 1 - z : z;
                int sy = axis == 1 ? s.h - 1 - y : y;
                int sx = axis == 2 ? s.w - 1 - x : x;
                out.at(z, y, x) = v.at(sz, sy, sx);
            }
    return out;
}

// One quarter turn about `axis` (the plane of the two remaining axes).
template <typename T>
Grid<T> rot90_once(const Grid<T>& v, int axis) {
    const Shape s = v.shape;
    Shape os = s;
    if (axis == 0) { os.h = s.w; os.w = s.h; }
    if (axis == 1) { os.d = s.w; os.w = s.d; }
    if (axis == 2) { os.d = s.h; os.h = s.d; }
    Grid<T> out(os);
    out.spacing = v.spacing;
#pragma omp parallel for schedule(static)
    for (int z = 0; z < os.d; ++z)
        for (int y = 0; y < os.h; ++y)
            for (int x = 0; x < os.w; ++x) {
                int sz, sy, sx;
                if (axis == 0) { sz = z; sy = x; sx = s.w - 1 - y; }
                else if (axis == 1) { sz = x; sy = y; sx = s.w - 1 - z; }
                else { sz = y; sy = s.h - 1 - z; sx = x; }
                out.at(z, y, x) = v.at(sz, sy, sx);
            }
    return out;
}

template <typename T>
Grid<T> flip_rotate_impl(const Grid<T>& v, const FlipRotate& fr) {
    Grid<T> out = v;
    if (fr.flip_z) out = flip_axis(out, 0);
    if (fr.flip_y) out = flip_axis(out, 1);
    if (fr.flip_x) out = flip_axis(out, 2);
    int count = ((fr.rot_count % 4) + 4) % 4;
    for (int i = 0; i < count; ++i) out = rot90_once(out, fr.rot_axis);
    return out;
}

template <typename T>
Grid<T> affine_warp_impl(const Grid<T>& v, const std::array<double, 9>& A, Interp interp) {
    const Shape s = v.shape;
    Grid<T> out(s);
    out.spacing = v.spacing;
    const double cz = 0.5 * (s.d - 1), cy = 0.5 * (s.h - 1), cx = 0.5 * (s.w - 1);
#pragma omp parallel for schedule(static)
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                double oz = z - cz, oy = y - cy, ox = x - cx;
                float pz = float(cz + A[0] * oz + A[1] * oy + A[2] * ox);
                float py = float(cy + A[3] * oz + A[4] * oy + A[5] * ox);
                float px = float(cx + A[6] * oz + A[7] * oy + A[8] * ox);
                if constexpr (std::is_same_v<T, float>) {
                    out.at(z, y, x) = interp == Interp::Trilinear
                                          ? kernels::sample_trilinear(v, pz, py, px)
                                          : kernels::sample_nearest(v, pz, py, px);
                } else {
                    out.at(z, y, x) = kernels::sample_nearest(v, pz, py, px);
                }
            }
    return out;
}

}  // namespace

Volume crop(const Volume& v, std::array<int, 3> center, Shape target) {
    return crop_impl(v, center, target);
}
BinaryMask crop(const BinaryMask& m, std::array<int, 3> center, Shape target) {
    return crop_impl(m, center, target);
}

Volume flip_rotate(const Volume& v, const FlipRotate& fr) { return flip_rotate_impl(v, fr); }
BinaryMask flip_rotate(const BinaryMask& m, const FlipRotate& fr) {
    return flip_rotate_impl(m, fr);
}

Volume zoom(const Volume& v, std::array<float, 3> factor, Interp interp) {
    for (float f : factor)
        if (!(f > 0.f)) throw Error("bad-zoom-factor", "zoom factor must be positive");
    std::array<double, 9> A = {1.0 / factor[0], 0, 0, 0, 1.0 / factor[1], 0, 0, 0, 1.0 / factor[2]};
    return affine_warp_impl(v, A, interp);
}

BinaryMask zoom(const BinaryMask& m, std::array<float, 3> factor) {
    for (float f : factor)
        if (!(f > 0.f)) throw Error("bad-zoom-factor", "zoom factor must be positive");
    std::array<double, 9> A = {1.0 / factor[0], 0, 0, 0, 1.0 / factor[1], 0, 0, 0, 1.0 / factor[2]};
    return affine_warp_impl(m, A, Interp::Nearest);
}

BinaryMask dilate(const BinaryMask& m, int radius) {
    if (radius <= 0) return m;
    BinaryMask a = m, b(m.shape);
    b.spacing = m.spacing;
    kernels::slide_max_axis(a.data.data(), b.data.data(), m.shape, 0, radius);
    kernels::slide_max_axis(b.data.data(), a.data.data(), m.shape, 1, radius);
    kernels::slide_max_axis(a.data.data(), b.data.data(), m.shape, 2, radius);
    b.spacing = m.spacing;
    return b;
}

BinaryMask erode(const BinaryMask& m, int radius, bool border_fg) {
    if (radius <= 0) return m;
    uint8_t border = border_fg ? 1 : 0;
    BinaryMask a = m, b(m.shape);
    kernels::slide_min_axis(a.data.data(), b.data.data(), m.shape, 0, radius, border);
    kernels::slide_min_axis(b.data.data(), a.data.data(), m.shape, 1, radius, border);
    kernels::slide_min_axis(a.data.data(), b.data.data(), m.shape, 2, radius, border);
    b.spacing = m.spacing;
    return b;
}

ElasticField elastic_field(Shape shape, int control_spacing, float sigma, float magnitude,
                           Rng& rng) {
    if (control_spacing < 1) control_spacing = 1;
    Shape cs{shape.d / control_spacing + 3, shape.h / control_spacing + 3,
             shape.w / control_spacing + 3};
    float sigma_c = sigma / float(control_spacing);

    Volume coarse[3] = {Volume(cs), Volume(cs), Volume(cs)};
    for (auto& c : coarse)
        for (auto& v : c.data) v = float(rng.normal());

    // Smoothing white noise with kernel k scales the variance by sum(k^2)
    // per axis; divide it back out so the base field has unit std.
    auto k = kernels::gaussian_kernel(sigma_c);
    double ss = 0.0;
    for (float v : k) ss += double(v) * v;
    float norm = float(std::pow(ss, 1.5));

    for (auto& c : coarse) {
        kernels::gaussian_smooth_inplace(c, sigma_c, sigma_c, sigma_c);
        for (auto& v : c.data) v /= norm;
    }

    ElasticField f{Volume(shape), Volume(shape), Volume(shape)};
    Volume* outs[3] = {&f.dz, &f.dy, &f.dx};
    const float inv = 1.f / float(control_spacing);
    const float unit = 0.01f;  // magnitude 100 <=> one-voxel std

    // Control coordinates are axis-separable; precompute index/weight pairs.
    auto axis_lut = [&](int extent, int limit, std::vector<int>& i0, std::vector<float>& fr) {
        i0.resize(size_t(extent));
        fr.resize(size_t(extent));
        for (int i = 0; i < extent; ++i) {
            float pos = i * inv;
            int base = int(std::floor(pos));
            base = std::min(base, limit - 2);
            i0[size_t(i)] = base;
            fr[size_t(i)] = pos - float(base);
        }
    };
    std::vector<int> zi, yi, xi;
    std::vector<float> zf, yf, xf;
    axis_lut(shape.d, cs.d, zi, zf);
    axis_lut(shape.h, cs.h, yi, yf);
    axis_lut(shape.w, cs.w, xi, xf);

    for (int a = 0; a < 3; ++a) {
        const Volume& c = coarse[a];
#pragma omp parallel for schedule(static)
        for (int z = 0; z < shape.d; ++z) {
            const float wz1 = zf[size_t(z)], wz0 = 1.f - wz1;
            const int z0 = zi[size_t(z)];
            for (int y = 0; y < shape.h; ++y) {
                const float wy1 = yf[size_t(y)], wy0 = 1.f - wy1;
                const int y0 = yi[size_t(y)];
                const float* r00 = &c.data[size_t(c.idx(z0, y0, 0))];
                const float* r01 = &c.data[size_t(c.idx(z0, y0 + 1, 0))];
                const float* r10 = &c.data[size_t(c.idx(z0 + 1, y0, 0))];
                const float* r11 = &c.data[size_t(c.idx(z0 + 1, y0 + 1, 0))];
                float* dst = &outs[a]->data[size_t(outs[a]->idx(z, y, 0))];
                for (int x = 0; x < shape.w; ++x) {
                    const float wx1 = xf[size_t(x)], wx0 = 1.f - wx1;
                    const int x0 = xi[size_t(x)];
                    float v00 = r00[x0] * wx0 + r00[x0 + 1] * wx1;
                    float v01 = r01[x0] * wx0 + r01[x0 + 1] * wx1;
                    float v10 = r10[x0] * wx0 + r10[x0 + 1] * wx1;
                    float v11 = r11[x0] * wx0 + r11[x0 + 1] * wx1;
                    float base = wz0 * (v00 * wy0 + v01 * wy1) + wz1 * (v10 * wy0 + v11 * wy1);
                    dst[x] = magnitude * (unit * base);
                }
            }
        }
    }
    return f;
}

Volume warp(const Volume& v, const ElasticField& field, Interp interp) {
    require_same_shape(v.shape, field.dz.shape);
    Volume out(v.shape);
    out.spacing = v.spacing;
    const Shape s = v.shape;
#pragma omp parallel for schedule(static)
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                float pz = z + field.dz.at(z, y, x);
                float py = y + field.dy.at(z, y, x);
                float px = x + field.dx.at(z, y, x);
                out.at(z, y, x) = interp == Interp::Trilinear
                                      ? kernels::sample_trilinear(v, pz, py, px)
                                      : kernels::sample_nearest(v, pz, py, px);
            }
    return out;
}

BinaryMask warp(const BinaryMask& m, const ElasticField& field) {
    require_same_shape(m.shape, field.dz.shape);
    BinaryMask out(m.shape);
    out.spacing = m.spacing;
    const Shape s = m.shape;
#pragma omp parallel for schedule(static)
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                float pz = z + field.dz.at(z, y, x);
                float py = y + field.dy.at(z, y, x);
                float px = x + field.dx.at(z, y, x);
                out.at(z, y, x) = kernels::sample_nearest(m, pz, py, px);
            }
    return out;
}

Volume elastic_deform(const Volume& v, int control_spacing, float sigma, float magnitude,
                      Rng& rng, Interp interp) {
    if (magnitude == 0.f) return v;
    auto field = elastic_field(v.shape, control_spacing, sigma, magnitude, rng);
    return warp(v, field, interp);
}

BinaryMask elastic_deform(const BinaryMask& m, int control_spacing, float sigma,
                          float magnitude, Rng& rng) {
    if (magnitude == 0.f) return m;
    auto field = elastic_field(m.shape, control_spacing, sigma, magnitude, rng);
    return warp(m, field);
}

Volume gaussian_smooth(const Volume& v, float sigma_z, float sigma_y, float sigma_x) {
    Volume out = v;
    kernels::gaussian_smooth_inplace(out, sigma_z, sigma_y, sigma_x);
    return out;
}

Volume gaussian_smooth(const Volume& v, float sigma) {
    return gaussian_smooth(v, sigma, sigma, sigma);
}

BinaryMask threshold(const Volume& v, float tau) {
    BinaryMask out(v.shape);
    out.spacing = v.spacing;
    const int64_t n = v.shape.voxels();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) out.data[size_t(i)] = v.data[size_t(i)] > tau ? 1 : 0;
    return out;
}

Components connected_components(const BinaryMask& m, int connectivity) {
    if (connectivity != 6 && connectivity != 26)
        throw Error("bad-connectivity", "connectivity must be 6 or 26");

    static const int off6[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                   {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
    int off26[26][3];
    int n26 = 0;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dz == 0 && dy == 0 && dx == 0) continue;
                off26[n26][0] = dz; off26[n26][1] = dy; off26[n26][2] = dx;
                ++n26;
            }
    const int(*offs)[3] = connectivity == 6 ? off6 : off26;
    const int n_offs = connectivity == 6 ? 6 : 26;

    Components out;
    out.shape = m.shape;
    out.labels.assign(size_t(m.shape.voxels()), 0);
    std::vector<int64_t> stack;

    const Shape s = m.shape;
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                int64_t i = m.idx(z, y, x);
                if (!m.data[size_t(i)] || out.labels[size_t(i)]) continue;
                int32_t label = ++out.count;
                int64_t size = 0;
                stack.clear();
                stack.push_back(i);
                out.labels[size_t(i)] = label;
                while (!stack.empty()) {
                    int64_t cur = stack.back();
                    stack.pop_back();
                    ++size;
                    int cz = int(cur / (int64_t(s.h) * s.w));
                    int rem = int(cur % (int64_t(s.h) * s.w));
                    int cy = rem / s.w, cx = rem % s.w;
                    for (int k = 0; k < n_offs; ++k) {
                        int nz = cz + offs[k][0], ny = cy + offs[k][1], nx = cx + offs[k][2];
                        if (!m.in_bounds(nz, ny, nx)) continue;
                        int64_t ni = m.idx(nz, ny, nx);
                        if (m.data[size_t(ni)] && !out.labels[size_t(ni)]) {
                            out.labels[size_t(ni)] = label;
                            stack.push_back(ni);
                        }
                    }
                }
                out.sizes.push_back(size);
            }
    return out;
}

BinaryMask remove_small_components(const BinaryMask& m, int64_t min_size, int connectivity) {
    auto cc = connected_components(m, connectivity);
    BinaryMask out(m.shape);
    out.spacing = m.spacing;
    for (size_t i = 0; i < out.data.size(); ++i) {
        int32_t l = cc.labels[i];
        out.data[i] = (l > 0 && cc.sizes[size_t(l - 1)] >= min_size) ? 1 : 0;
    }
    return out;
}

namespace {

// Local 3x3x3 neighborhood as a 27-flag array, cell 13 = center.
struct Neighborhood {
    uint8_t cell[27];
};

inline Neighborhood gather_neighborhood(const BinaryMask& m, int z, int y, int x) {
    Neighborhood nb;
    int c = 0;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx, ++c) {
                int nz = z + dz, ny = y + dy, nx = x + dx;
                nb.cell[c] = m.in_bounds(nz, ny, nx) ? m.at(nz, ny, nx) : 0;
            }
    return nb;
}

struct ThinningTables {
    int adj26[27][26];  // 26-adjacency inside the cube
    int n_adj26[27];
    int adj6[27][6];    // 6-adjacency inside the cube
    int n_adj6[27];
    bool in_n18[27];    // Chebyshev-1 cells with at most two nonzero offsets
    bool face[27];      // the six face neighbors of the center
};

const ThinningTables& tables() {
    static const ThinningTables t = [] {
        ThinningTables tb{};
        auto coord = [](int i, int& z, int& y, int& x) {
            z = i / 9 - 1; y = (i / 3) % 3 - 1; x = i % 3 - 1;
        };
        for (int i = 0; i < 27; ++i) {
            int zi, yi, xi;
            coord(i, zi, yi, xi);
            tb.n_adj26[i] = tb.n_adj6[i] = 0;
            int nz = std::abs(zi) + std::abs(yi) + std::abs(xi);
            int cheb = std::max({std::abs(zi), std::abs(yi), std::abs(xi)});
            tb.in_n18[i] = cheb == 1 && nz <= 2;
            tb.face[i] = nz == 1;
            for (int j = 0; j < 27; ++j) {
                if (i == j) continue;
                int zj, yj, xj;
                coord(j, zj, yj, xj);
                int dz = std::abs(zi - zj), dy = std::abs(yi - yj), dx = std::abs(xi - xj);
                if (std::max({dz, dy, dx}) == 1) tb.adj26[i][tb.n_adj26[i]++] = j;
                if (dz + dy + dx == 1) tb.adj6[i][tb.n_adj6[i]++] = j;
            }
        }
        return tb;
    }();
    return t;
}

int count_fg_26(const Neighborhood& nb) {
    int n = 0;
    for (int i = 0; i < 27; ++i)
        if (i != 13 && nb.cell[i]) ++n;
    return n;
}

// Simple point per Bertrand/Malandain: exactly one 26-component of
// foreground in N26, and exactly one 6-component of background in N18
// that is 6-adjacent to the center.
bool is_simple(const Neighborhood& nb) {
    const ThinningTables& tb = tables();

    // Foreground 26-components among the 26 neighbors.
    bool visited[27] = {};
    int fg_components = 0;
    int stack[27];
    for (int i = 0; i < 27; ++i) {
        if (i == 13 || !nb.cell[i] || visited[i]) continue;
        if (++fg_components > 1) return false;
        int top = 0;
        stack[top++] = i;
        visited[i] = true;
        while (top) {
            int c = stack[--top];
            for (int k = 0; k < tb.n_adj26[c]; ++k) {
                int j = tb.adj26[c][k];
                if (j != 13 && nb.cell[j] && !visited[j]) {
                    visited[j] = true;
                    stack[top++] = j;
                }
            }
        }
    }
    if (fg_components != 1) return false;

    // Background 6-components within N18 touching the center face-wise.
    bool bvisited[27] = {};
    int bg_components = 0;
    for (int i = 0; i < 27; ++i) {
        if (!tb.face[i] || nb.cell[i] || bvisited[i]) continue;
        if (++bg_components > 1) return false;
        int top = 0;
        stack[top++] = i;
        bvisited[i] = true;
        while (top) {
            int c = stack[--top];
            for (int k = 0; k < tb.n_adj6[c]; ++k) {
                int j = tb.adj6[c][k];
                if (tb.in_n18[j] && !nb.cell[j] && !bvisited[j]) {
                    bvisited[j] = true;
                    stack[top++] = j;
                }
            }
        }
    }
    return bg_components == 1;
}

}  // namespace

BinaryMask skeletonize(const BinaryMask& m) {
    BinaryMask x = m;
    const Shape s = m.shape;
    static const int dirs[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                   {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};

    std::vector<int64_t> candidates;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& dir : dirs) {
            candidates.clear();
            // Candidate collection is read-only; per-slice buffers keep the
            // final order independent of the thread count.
            std::vector<std::vector<int64_t>> per_slice(size_t(s.d));
#pragma omp parallel for schedule(static)
            for (int z = 0; z < s.d; ++z) {
                auto& local = per_slice[size_t(z)];
                for (int y = 0; y < s.h; ++y)
                    for (int xx = 0; xx < s.w; ++xx) {
                        if (!x.at(z, y, xx)) continue;
                        int bz = z + dir[0], by = y + dir[1], bx = xx + dir[2];
                        bool border = !x.in_bounds(bz, by, bx) || !x.at(bz, by, bx);
                        if (!border) continue;
                        Neighborhood nb = gather_neighborhood(x, z, y, xx);
                        if (count_fg_26(nb) == 1) continue;  // endpoint
                        if (is_simple(nb)) local.push_back(x.idx(z, y, xx));
                    }
            }
            for (auto& local : per_slice)
                candidates.insert(candidates.end(), local.begin(), local.end());

            // Sequential deletion with re-check keeps topology exact.
            for (int64_t i : candidates) {
                int z = int(i / (int64_t(s.h) * s.w));
                int rem = int(i % (int64_t(s.h) * s.w));
                int y = rem / s.w, xx = rem % s.w;
                Neighborhood nb = gather_neighborhood(x, z, y, xx);
                if (count_fg_26(nb) == 1) continue;
                if (!is_simple(nb)) continue;
                x.data[size_t(i)] = 0;
                changed = true;
            }
        }
    }
    return x;
}

Volume median_filter(const Volume& v, int size) {
    if (size < 1 || size % 2 == 0)
        throw Error("bad-filter-size", "median filter size must be odd and positive");
    if (size == 1) return v;
    const int r = size / 2;
    const Shape s = v.shape;
    Volume out(s);
    out.spacing = v.spacing;
    const int window = size * size * size;
#pragma omp parallel
    {
        std::vector<float> buf(static_cast<size_t>(window), 0.f);
#pragma omp for schedule(static)
        for (int z = 0; z < s.d; ++z)
            for (int y = 0; y < s.h; ++y)
                for (int x = 0; x < s.w; ++x) {
                    int n = 0;
                    for (int dz = -r; dz <= r; ++dz) {
                        int zz = reflect_index(z + dz, s.d);
                        for (int dy = -r; dy <= r; ++dy) {
                            int yy = reflect_index(y + dy, s.h);
                            const float* row = &v.data[size_t(v.idx(zz, yy, 0))];
                            for (int dx = -r; dx <= r; ++dx)
                                buf[size_t(n++)] = row[reflect_index(x + dx, s.w)];
                        }
                    }
                    auto mid = buf.begin() + window / 2;
                    std::nth_element(buf.begin(), mid, buf.end());
                    out.at(z, y, x) = *mid;
                }
    }
    return out;
}

BinaryMask morphological_close(const BinaryMask& m) {
    // Erosion treats out-of-bounds as foreground so closing stays extensive
    // at the volume border.
    return erode(dilate(m, 1), 1, true);
}

Volume affine_warp(const Volume& v, const std::array<double, 9>& A, Interp interp) {
    return affine_warp_impl(v, A, interp);
}

BinaryMask affine_warp(const BinaryMask& m, const std::array<double, 9>& A) {
    return affine_warp_impl(m, A, Interp::Nearest);
}

}  // namespace vforge::ops
