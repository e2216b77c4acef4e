// Minimal single-file NIfTI-1 reader/writer: 3D volumes, datatype u8
// (masks) or f32 (images), little-endian, transparent .gz handling.
// Anything else errors loudly.

#ifndef VFORGE_NIFTI_HPP
#define VFORGE_NIFTI_HPP

#include <optional>
#include <string>

#include "vforge/volume.hpp"

namespace vforge::io {

constexpr int16_t kDatatypeU8 = 2;
constexpr int16_t kDatatypeF32 = 16;

struct VolumeFile {
    int16_t datatype = 0;
    Volume image;  // payload after scl slope/intercept
};

// Errors: "bad-magic", "unsupported-format" (detached ni1 headers),
// "unsupported-datatype", "unsupported-dims", "truncated-payload",
// "io-failure".
VolumeFile read_volume_file(const std::string& path);

Volume read_image(const std::string& path);
// Requires a payload of exactly {0, 1}.
BinaryMask read_mask(const std::string& path);

// f32 payload; bytes are deterministic for identical input (gz included).
void write_volume(const std::string& path, const Volume& v);
// u8 payload, datatype 2.
void write_mask(const std::string& path, const BinaryMask& m);

// 352 + voxels * bytes-per-voxel, the uncompressed size contract.
int64_t expected_file_size(Shape shape, int16_t datatype);

}  // namespace vforge::io

#endif
