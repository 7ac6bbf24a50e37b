#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "tfus/error.hpp"
#include "tfus/volume.hpp"

namespace tfus {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kVoxOffset = 352;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;

// NIfTI-1 header field byte offsets.
namespace off {
constexpr std::size_t sizeof_hdr = 0;
constexpr std::size_t dim = 40;
constexpr std::size_t datatype = 70;
constexpr std::size_t bitpix = 72;
constexpr std::size_t pixdim = 76;
constexpr std::size_t vox_offset = 108;
constexpr std::size_t scl_slope = 112;
constexpr std::size_t scl_inter = 116;
constexpr std::size_t xyzt_units = 123;
constexpr std::size_t descrip = 148;
constexpr std::size_t qform_code = 252;
constexpr std::size_t sform_code = 254;
constexpr std::size_t quatern_b = 256;
constexpr std::size_t qoffset_x = 268;
constexpr std::size_t srow_x = 280;
constexpr std::size_t magic = 344;
} // namespace off

template <typename T>
T get(const std::vector<char>& buf, std::size_t offset)
{
    T v;
    std::memcpy(&v, buf.data() + offset, sizeof(T));
    return v;
}

template <typename T>
void put(std::vector<char>& buf, std::size_t offset, T v)
{
    std::memcpy(buf.data() + offset, &v, sizeof(T));
}

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what)
{
    throw DataError("NIfTI " + path.string() + ": " + what);
}

} // namespace

Volume read_nifti(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open NIfTI file: " + path.string());

    std::vector<char> hdr(kHeaderSize);
    in.read(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    if (in.gcount() >= 2 && static_cast<unsigned char>(hdr[0]) == 0x1f &&
        static_cast<unsigned char>(hdr[1]) == 0x8b)
        fail(path, "gzip-compressed files are not supported (compression)");
    if (in.gcount() != static_cast<std::streamsize>(kHeaderSize)) fail(path, "truncated header");

    const auto sizeof_hdr = get<std::int32_t>(hdr, off::sizeof_hdr);
    if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
        std::ostringstream msg;
        msg << "unsupported sizeof_hdr " << sizeof_hdr << " (big-endian or not NIfTI-1)";
        fail(path, msg.str());
    }
    if (std::memcmp(hdr.data() + off::magic, "n+1\0", 4) != 0) {
        if (std::memcmp(hdr.data() + off::magic, "ni1\0", 4) == 0)
            fail(path, "unsupported format: magic \"ni1\" (detached header/image pair)");
        fail(path, "unsupported format: bad magic");
    }

    const auto ndim = get<std::int16_t>(hdr, off::dim);
    if (ndim < 1 || ndim > 7) fail(path, "invalid dim[0]");
    GridGeometry grid;
    for (int a = 0; a < 3; ++a) {
        const auto n = a < ndim ? get<std::int16_t>(hdr, off::dim + 2 * (a + 1)) : std::int16_t{1};
        if (n < 1) fail(path, "non-positive dim[" + std::to_string(a + 1) + "]");
        grid.dims[a] = n;
        float pd = get<float>(hdr, off::pixdim + 4 * (a + 1));
        grid.spacing[a] = (pd == 0.0f || !std::isfinite(pd)) ? 1.0 : std::abs(pd);
    }
    for (int a = 3; a < ndim; ++a)
        if (get<std::int16_t>(hdr, off::dim + 2 * (a + 1)) > 1)
            fail(path, "dim[" + std::to_string(a + 1) + "] > 1: only 3D volumes are supported");

    const auto datatype = get<std::int16_t>(hdr, off::datatype);
    if (datatype != kDtInt16 && datatype != kDtFloat32) {
        std::ostringstream msg;
        msg << "unsupported datatype " << datatype << " (expected 4 int16 or 16 float32)";
        fail(path, msg.str());
    }

    if (get<std::int16_t>(hdr, off::qform_code) > 0) {
        grid.origin = {get<float>(hdr, off::qoffset_x), get<float>(hdr, off::qoffset_x + 4),
                       get<float>(hdr, off::qoffset_x + 8)};
    }

    const float vox_offset = get<float>(hdr, off::vox_offset);
    if (vox_offset < static_cast<float>(kHeaderSize)) fail(path, "vox_offset inside header");
    in.seekg(static_cast<std::streamoff>(vox_offset));

    const std::size_t n = grid.size();
    std::vector<float> data(n);
    if (datatype == kDtFloat32) {
        in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(float)));
    } else {
        std::vector<std::int16_t> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()),
                static_cast<std::streamsize>(n * sizeof(std::int16_t)));
        for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<float>(raw[i]);
    }
    if (!in) fail(path, "truncated voxel data");

    const float slope = get<float>(hdr, off::scl_slope);
    const float inter = get<float>(hdr, off::scl_inter);
    if (slope != 0.0f && std::isfinite(slope) && !(slope == 1.0f && inter == 0.0f)) {
        for (float& v : data) v = v * slope + inter;
    }
    return Volume(grid, std::move(data));
}

void write_nifti(const Volume& vol, const std::filesystem::path& path)
{
    const auto& g = vol.grid();
    for (int a = 0; a < 3; ++a)
        if (g.dims[a] > 32767) throw DataError("write_nifti: dimension exceeds int16 range");

    std::vector<char> hdr(kHeaderSize, 0);
    put<std::int32_t>(hdr, off::sizeof_hdr, static_cast<std::int32_t>(kHeaderSize));
    put<std::int16_t>(hdr, off::dim, 3);
    for (int a = 0; a < 3; ++a) put<std::int16_t>(hdr, off::dim + 2 * (a + 1), static_cast<std::int16_t>(g.dims[a]));
    for (int a = 4; a < 8; ++a) put<std::int16_t>(hdr, off::dim + 2 * a, 1);
    put<std::int16_t>(hdr, off::datatype, kDtFloat32);
    put<std::int16_t>(hdr, off::bitpix, 32);
    put<float>(hdr, off::pixdim, 1.0f);
    for (int a = 0; a < 3; ++a) put<float>(hdr, off::pixdim + 4 * (a + 1), static_cast<float>(g.spacing[a]));
    put<float>(hdr, off::vox_offset, static_cast<float>(kVoxOffset));
    put<float>(hdr, off::scl_slope, 1.0f);
    put<float>(hdr, off::scl_inter, 0.0f);
    hdr[off::xyzt_units] = 2 | 8; // mm, s
    const char descrip[] = "tfus";
    std::memcpy(hdr.data() + off::descrip, descrip, sizeof(descrip));
    put<std::int16_t>(hdr, off::qform_code, 1);
    put<std::int16_t>(hdr, off::sform_code, 1);
    put<float>(hdr, off::quatern_b, 0.0f);
    put<float>(hdr, off::qoffset_x, static_cast<float>(g.origin.x));
    put<float>(hdr, off::qoffset_x + 4, static_cast<float>(g.origin.y));
    put<float>(hdr, off::qoffset_x + 8, static_cast<float>(g.origin.z));
    for (int r = 0; r < 3; ++r) {
        std::array<float, 4> row{0.0f, 0.0f, 0.0f, static_cast<float>(g.origin[r])};
        row[r] = static_cast<float>(g.spacing[r]);
        for (int c = 0; c < 4; ++c) put<float>(hdr, off::srow_x + 16 * r + 4 * c, row[c]);
    }
    std::memcpy(hdr.data() + off::magic, "n+1\0", 4);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write NIfTI file: " + path.string());
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    const std::array<char, 4> extension{0, 0, 0, 0};
    out.write(extension.data(), extension.size());
    out.write(reinterpret_cast<const char*>(vol.data().data()),
              static_cast<std::streamsize>(vol.size() * sizeof(float)));
    if (!out) throw DataError("I/O failure writing NIfTI file: " + path.string());
}

} // namespace tfus
