// Dense 3D grid containers used throughout vesselforge.
//
// Axis order is fixed as (z, y, x), C-contiguous: index = (z*h + y)*w + x.

#ifndef VFORGE_VOLUME_HPP
#define VFORGE_VOLUME_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vforge {

class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& msg)
        : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

struct Shape {
    int d = 0, h = 0, w = 0;

    int64_t voxels() const { return int64_t(d) * h * w; }
    int operator[](int axis) const { return axis == 0 ? d : (axis == 1 ? h : w); }
    int& operator[](int axis) { return axis == 0 ? d : (axis == 1 ? h : w); }
    bool operator==(const Shape&) const = default;
};

// Physical voxel extent, (z, y, x) order like Shape.
struct Spacing {
    float z = 1.f, y = 1.f, x = 1.f;
    float operator[](int axis) const { return axis == 0 ? z : (axis == 1 ? y : x); }
    bool operator==(const Spacing&) const = default;
};

template <typename T>
struct Grid {
    Shape shape;
    std::vector<T> data;
    std::optional<Spacing> spacing;

    Grid() = default;
    explicit Grid(Shape s, T fill = T{}) : shape(s), data(size_t(s.voxels()), fill) {}

    int64_t idx(int z, int y, int x) const {
        return (int64_t(z) * shape.h + y) * shape.w + x;
    }
    T at(int z, int y, int x) const { return data[size_t(idx(z, y, x))]; }
    T& at(int z, int y, int x) { return data[size_t(idx(z, y, x))]; }

    bool in_bounds(int z, int y, int x) const {
        return z >= 0 && z < shape.d && y >= 0 && y < shape.h && x >= 0 && x < shape.w;
    }
};

// Scalar image, intensities nominally in [0, 1] once normalized.
using Volume = Grid<float>;

// Strictly {0, 1} valued.
using BinaryMask = Grid<uint8_t>;

inline Volume to_volume(const BinaryMask& m) {
    Volume v(m.shape);
    v.spacing = m.spacing;
    for (size_t i = 0; i < m.data.size(); ++i) v.data[i] = float(m.data[i]);
    return v;
}

inline int64_t count_foreground(const BinaryMask& m) {
    int64_t n = 0;
    for (uint8_t b : m.data) n += b;
    return n;
}

inline void require_same_shape(const Shape& a, const Shape& b) {
    if (!(a == b))
        throw Error("shape-mismatch", "shapes (" + std::to_string(a.d) + "," + std::to_string(a.h) +
                                          "," + std::to_string(a.w) + ") vs (" + std::to_string(b.d) +
                                          "," + std::to_string(b.h) + "," + std::to_string(b.w) + ")");
}

}  // namespace vforge

#endif
