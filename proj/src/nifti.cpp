#include "vforge/nifti.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <vector>

namespace vforge::io {

namespace {

#pragma pack(push, 1)
struct Nifti1Header {
    int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    int32_t extents;
    int16_t session_error;
    char regular;
    char dim_info;
    int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    int16_t intent_code;
    int16_t datatype;
    int16_t bitpix;
    int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    int16_t qform_code, sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4], srow_y[4], srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)

static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

struct GzFileCloser {
    gzFile f;
    ~GzFileCloser() {
        if (f) gzclose(f);
    }
};

Nifti1Header make_header(Shape s, std::optional<Spacing> spacing, int16_t datatype) {
    Nifti1Header h{};
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 3;
    h.dim[1] = int16_t(s.w);  // NIfTI dims run x fastest
    h.dim[2] = int16_t(s.h);
    h.dim[3] = int16_t(s.d);
    for (int i = 4; i < 8; ++i) h.dim[i] = 1;
    h.datatype = datatype;
    h.bitpix = datatype == kDatatypeU8 ? 8 : 32;
    h.pixdim[0] = 1.f;
    Spacing sp = spacing.value_or(Spacing{});
    h.pixdim[1] = sp.x;
    h.pixdim[2] = sp.y;
    h.pixdim[3] = sp.z;
    for (int i = 4; i < 8; ++i) h.pixdim[i] = 1.f;
    h.vox_offset = 352.f;
    h.scl_slope = 1.f;
    h.scl_inter = 0.f;
    std::snprintf(h.descrip, sizeof(h.descrip), "vesselforge");
    std::memcpy(h.magic, "n+1", 4);
    return h;
}

void write_bytes(const std::string& path, const Nifti1Header& h, const void* payload,
                 size_t payload_bytes) {
    const char pad[4] = {0, 0, 0, 0};
    if (path.ends_with(".gz")) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (!f) throw Error("io-failure", "cannot open " + path);
        GzFileCloser closer{f};
        if (gzwrite(f, &h, sizeof(h)) != int(sizeof(h)) || gzwrite(f, pad, 4) != 4 ||
            (payload_bytes > 0 &&
             gzwrite(f, payload, unsigned(payload_bytes)) != int(payload_bytes)))
            throw Error("io-failure", "short write to " + path);
    } else {
        FILE* f = std::fopen(path.c_str(), "wb");
        if (!f) throw Error("io-failure", "cannot open " + path);
        bool ok = std::fwrite(&h, 1, sizeof(h), f) == sizeof(h) &&
                  std::fwrite(pad, 1, 4, f) == 4 &&
                  std::fwrite(payload, 1, payload_bytes, f) == payload_bytes;
        std::fclose(f);
        if (!ok) throw Error("io-failure", "short write to " + path);
    }
}

}  // namespace

int64_t expected_file_size(Shape shape, int16_t datatype) {
    return 352 + shape.voxels() * (datatype == kDatatypeU8 ? 1 : 4);
}

VolumeFile read_volume_file(const std::string& path) {
    // gzread handles plain files transparently as well.
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw Error("io-failure", "cannot open " + path);
    GzFileCloser closer{f};

    Nifti1Header h{};
    if (gzread(f, &h, sizeof(h)) != int(sizeof(h)))
        throw Error("truncated-payload", "file shorter than a NIfTI-1 header: " + path);

    if (std::memcmp(h.magic, "ni1", 3) == 0)
        throw Error("unsupported-format", "detached header/image pairs are not supported");
    if (std::memcmp(h.magic, "n+1", 3) != 0 || h.sizeof_hdr != 348)
        throw Error("bad-magic", "not a single-file NIfTI-1 volume: " + path);
    if (h.datatype != kDatatypeU8 && h.datatype != kDatatypeF32)
        throw Error("unsupported-datatype", "datatype " + std::to_string(h.datatype));
    if (h.dim[0] != 3)
        throw Error("unsupported-dims", "expected 3D volume, dim[0]=" + std::to_string(h.dim[0]));

    Shape s{h.dim[3], h.dim[2], h.dim[1]};
    if (s.voxels() <= 0) throw Error("unsupported-dims", "non-positive volume extent");

    int64_t offset = int64_t(h.vox_offset);
    if (offset < 348) throw Error("bad-magic", "vox_offset below header size");
    if (gzseek(f, z_off_t(offset), SEEK_SET) < 0)
        throw Error("truncated-payload", "cannot seek to payload");

    VolumeFile out;
    out.datatype = h.datatype;
    out.image = Volume(s);
    if (h.pixdim[1] > 0.f || h.pixdim[2] > 0.f || h.pixdim[3] > 0.f)
        out.image.spacing = Spacing{h.pixdim[3], h.pixdim[2], h.pixdim[1]};

    const int64_t n = s.voxels();
    if (h.datatype == kDatatypeU8) {
        std::vector<uint8_t> raw(size_t(n), 0);
        if (gzread(f, raw.data(), unsigned(n)) != int(n))
            throw Error("truncated-payload", "payload shorter than dim implies");
        for (int64_t i = 0; i < n; ++i) out.image.data[size_t(i)] = float(raw[size_t(i)]);
    } else {
        if (gzread(f, out.image.data.data(), unsigned(n * 4)) != int(n * 4))
            throw Error("truncated-payload", "payload shorter than dim implies");
    }

    if (h.scl_slope != 0.f && (h.scl_slope != 1.f || h.scl_inter != 0.f))
        for (auto& v : out.image.data) v = v * h.scl_slope + h.scl_inter;
    return out;
}

Volume read_image(const std::string& path) { return read_volume_file(path).image; }

BinaryMask read_mask(const std::string& path) {
    VolumeFile vf = read_volume_file(path);
    BinaryMask m(vf.image.shape);
    m.spacing = vf.image.spacing;
    for (size_t i = 0; i < m.data.size(); ++i) {
        float v = vf.image.data[i];
        if (v != 0.f && v != 1.f)
            throw Error("not-binary", "mask payload contains values other than {0,1}");
        m.data[i] = v != 0.f ? 1 : 0;
    }
    return m;
}

void write_volume(const std::string& path, const Volume& v) {
    Nifti1Header h = make_header(v.shape, v.spacing, kDatatypeF32);
    write_bytes(path, h, v.data.data(), size_t(v.shape.voxels()) * 4);
}

void write_mask(const std::string& path, const BinaryMask& m) {
    Nifti1Header h = make_header(m.shape, m.spacing, kDatatypeU8);
    write_bytes(path, h, m.data.data(), size_t(m.shape.voxels()));
}

}  // namespace vforge::io
