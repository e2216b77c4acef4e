#include "vforge/reference.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace vforge::serial {

namespace {

int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

}  // namespace

Volume convolve_dense(const Volume& v, const std::vector<float>& kernel, int radius) {
    const Shape s = v.shape;
    Volume out(s);
    const int side = 2 * radius + 1;
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                double acc = 0.0;
                for (int dz = -radius; dz <= radius; ++dz)
                    for (int dy = -radius; dy <= radius; ++dy)
                        for (int dx = -radius; dx <= radius; ++dx) {
                            float kv = kernel[size_t(((dz + radius) * side + dy + radius) * side +
                                                     dx + radius)];
                            acc += double(kv) * v.at(reflect(z + dz, s.d), reflect(y + dy, s.h),
                                                     reflect(x + dx, s.w));
                        }
                out.at(z, y, x) = float(acc);
            }
    return out;
}

BinaryMask dilate_scan(const BinaryMask& m, int radius) {
    const Shape s = m.shape;
    BinaryMask out(s);
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                uint8_t v = 0;
                for (int dz = -radius; dz <= radius && !v; ++dz)
                    for (int dy = -radius; dy <= radius && !v; ++dy)
                        for (int dx = -radius; dx <= radius && !v; ++dx) {
                            int zz = z + dz, yy = y + dy, xx = x + dx;
                            if (m.in_bounds(zz, yy, xx) && m.at(zz, yy, xx)) v = 1;
                        }
                out.at(z, y, x) = v;
            }
    return out;
}

BinaryMask erode_scan(const BinaryMask& m, int radius, bool border_fg) {
    const Shape s = m.shape;
    BinaryMask out(s);
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                uint8_t v = 1;
                for (int dz = -radius; dz <= radius && v; ++dz)
                    for (int dy = -radius; dy <= radius && v; ++dy)
                        for (int dx = -radius; dx <= radius && v; ++dx) {
                            int zz = z + dz, yy = y + dy, xx = x + dx;
                            uint8_t cell = m.in_bounds(zz, yy, xx) ? m.at(zz, yy, xx)
                                                                   : (border_fg ? 1 : 0);
                            if (!cell) v = 0;
                        }
                out.at(z, y, x) = v;
            }
    return out;
}

Volume median_scan(const Volume& v, int size) {
    const int r = size / 2;
    const Shape s = v.shape;
    Volume out(s);
    std::vector<float> buf;
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                buf.clear();
                for (int dz = -r; dz <= r; ++dz)
                    for (int dy = -r; dy <= r; ++dy)
                        for (int dx = -r; dx <= r; ++dx)
                            buf.push_back(v.at(reflect(z + dz, s.d), reflect(y + dy, s.h),
                                               reflect(x + dx, s.w)));
                std::sort(buf.begin(), buf.end());
                out.at(z, y, x) = buf[buf.size() / 2];
            }
    return out;
}

std::vector<int32_t> nearest_seed_labels(Shape s,
                                         const std::vector<std::array<int, 3>>& seeds) {
    std::vector<int32_t> labels(size_t(s.voxels()), 0);
    int64_t i = 0;
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x, ++i) {
                int64_t best = -1;
                int32_t best_label = 0;
                for (size_t k = 0; k < seeds.size(); ++k) {
                    int64_t dz = z - seeds[k][0], dy = y - seeds[k][1], dx = x - seeds[k][2];
                    int64_t d2 = dz * dz + dy * dy + dx * dx;
                    if (best < 0 || d2 < best) {
                        best = d2;
                        best_label = int32_t(k + 1);
                    }
                }
                labels[size_t(i)] = best_label;
            }
    return labels;
}

int component_count(const BinaryMask& m, int connectivity) {
    const Shape s = m.shape;
    std::vector<uint8_t> seen(size_t(s.voxels()), 0);
    int count = 0;
    std::deque<std::array<int, 3>> queue;
    for (int z = 0; z < s.d; ++z)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                int64_t i = m.idx(z, y, x);
                if (!m.data[size_t(i)] || seen[size_t(i)]) continue;
                ++count;
                seen[size_t(i)] = 1;
                queue.push_back({z, y, x});
                while (!queue.empty()) {
                    auto [cz, cy, cx] = queue.front();
                    queue.pop_front();
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                if (dz == 0 && dy == 0 && dx == 0) continue;
                                if (connectivity == 6 &&
                                    std::abs(dz) + std::abs(dy) + std::abs(dx) != 1)
                                    continue;
                                int nz = cz + dz, ny = cy + dy, nx = cx + dx;
                                if (!m.in_bounds(nz, ny, nx)) continue;
                                int64_t ni = m.idx(nz, ny, nx);
                                if (m.data[size_t(ni)] && !seen[size_t(ni)]) {
                                    seen[size_t(ni)] = 1;
                                    queue.push_back({nz, ny, nx});
                                }
                            }
                }
            }
    return count;
}

double dice_counted(const BinaryMask& a, const BinaryMask& b) {
    int64_t na = 0, nb = 0, inter = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        na += a.data[i];
        nb += b.data[i];
        inter += a.data[i] & b.data[i];
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * double(inter) / double(na + nb);
}

Volume gaussian_smooth(const Volume& v, float sigma) {
    if (sigma <= 0.f) return v;
    int radius = int(std::ceil(4.0 * sigma));
    std::vector<double> k(size_t(2 * radius + 1));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[size_t(i + radius)] = std::exp(-0.5 * double(i) * i / (double(sigma) * sigma));
        total += k[size_t(i + radius)];
    }
    for (auto& kv : k) kv /= total;

    const Shape s = v.shape;
    Volume cur = v, next(s);
    for (int axis = 0; axis < 3; ++axis) {
        int n = s[axis];
        for (int z = 0; z < s.d; ++z)
            for (int y = 0; y < s.h; ++y)
                for (int x = 0; x < s.w; ++x) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i) {
                        int zz = z, yy = y, xx = x;
                        if (axis == 0) zz = reflect(z + i, n);
                        if (axis == 1) yy = reflect(y + i, n);
                        if (axis == 2) xx = reflect(x + i, n);
                        acc += k[size_t(i + radius)] * cur.at(zz, yy, xx);
                    }
                    next.at(z, y, x) = float(acc);
                }
        std::swap(cur, next);
    }
    return cur;
}

BinaryMask dilate(const BinaryMask& m, int radius) {
    return dilate_scan(m, radius);
}

}  // namespace vforge::serial
