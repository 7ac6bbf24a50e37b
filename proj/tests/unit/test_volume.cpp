#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "tfus/error.hpp"
#include "tfus/volume.hpp"

using namespace tfus;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "tfus_unit";
    fs::create_directories(dir);
    return dir / name;
}

GridGeometry cube(int n, double sp = 1.0)
{
    GridGeometry g;
    g.dims = {n, n, n};
    g.spacing = {sp, sp, sp};
    return g;
}

// Hand-rolled NIfTI-1 int16 file, independent of write_nifti.
void write_int16_nifti(const fs::path& p, const char* magic, std::int16_t value, float slope, float inter)
{
    std::vector<char> h(352, 0);
    const auto put16 = [&](std::size_t o, std::int16_t v) { std::memcpy(&h[o], &v, 2); };
    const auto put32 = [&](std::size_t o, std::int32_t v) { std::memcpy(&h[o], &v, 4); };
    const auto putf = [&](std::size_t o, float v) { std::memcpy(&h[o], &v, 4); };
    put32(0, 348);
    put16(40, 3);
    put16(42, 1);
    put16(44, 1);
    put16(46, 1);
    put16(70, 4);
    put16(72, 16);
    putf(80, 1.0f);
    putf(84, 1.0f);
    putf(88, 1.0f);
    putf(108, 352.0f);
    putf(112, slope);
    putf(116, inter);
    std::memcpy(&h[344], magic, 4);
    std::ofstream out(p, std::ios::binary);
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    out.write(reinterpret_cast<const char*>(&value), 2);
}

// Brute-force Euclidean ball dilation.
Volume brute_dilate(const Volume& m, int r)
{
    const auto& g = m.grid();
    Volume out(g);
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                bool hit = false;
                for (int dk = -r; dk <= r && !hit; ++dk)
                    for (int dj = -r; dj <= r && !hit; ++dj)
                        for (int di = -r; di <= r && !hit; ++di) {
                            if (di * di + dj * dj + dk * dk > r * r) continue;
                            if (g.contains(i + di, j + dj, k + dk) && m.at(i + di, j + dj, k + dk) != 0.0f) hit = true;
                        }
                out.at(i, j, k) = hit ? 1.0f : 0.0f;
            }
    return out;
}

Volume shell_ct(int n, double r_out, double r_in)
{
    Volume v(cube(n), -1000.0f);
    const double c = 0.5 * (n - 1);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double r = std::sqrt((i - c) * (i - c) + (j - c) * (j - c) + (k - c) * (k - c));
                if (r <= r_out && r >= r_in) v.at(i, j, k) = 1800.0f;
            }
    return v;
}

} // namespace

TEST_CASE("nifti float32 round trip is bit exact")
{
    GridGeometry g;
    g.dims = {5, 4, 3};
    g.spacing = {0.5, 0.75, 1.25};
    g.origin = {-3.0, 2.5, 10.0};
    std::mt19937 rng(7);
    std::uniform_real_distribution<float> u(-2000.0f, 3000.0f);
    Volume v(g);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = u(rng);
    const auto p = temp_path("roundtrip.nii");
    write_nifti(v, p);
    const Volume r = read_nifti(p);
    CHECK(r.dims() == g.dims);
    CHECK(r.spacing() == g.spacing);
    CHECK(r.grid().origin == g.origin);
    CHECK(std::memcmp(r.data().data(), v.data().data(), v.size() * sizeof(float)) == 0);
}

TEST_CASE("nifti layout of a 2x2x2 zero volume")
{
    const auto p = temp_path("zeros.nii");
    write_nifti(Volume(cube(2)), p);
    CHECK(fs::file_size(p) == 348u + 4u + 32u);
}

TEST_CASE("nifti int16 scaling applies slope and intercept")
{
    const auto p = temp_path("int16.nii");
    write_int16_nifti(p, "n+1\0", 100, 2.0f, 5.0f);
    const Volume v = read_nifti(p);
    CHECK(v[0] == doctest::Approx(205.0));
}

TEST_CASE("nifti read errors")
{
    const auto p = temp_path("ni1.nii");
    write_int16_nifti(p, "ni1\0", 1, 0.0f, 0.0f);
    CHECK_THROWS_WITH_AS(read_nifti(p), doctest::Contains("ni1"), DataError);
    CHECK_THROWS_AS(read_nifti(temp_path("does_not_exist.nii")), DataError);

    // Unsupported datatype is named in the message.
    write_int16_nifti(p, "n+1\0", 1, 0.0f, 0.0f);
    {
        std::fstream f(p, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(70);
        const std::int16_t dt = 64;
        f.write(reinterpret_cast<const char*>(&dt), 2);
    }
    CHECK_THROWS_WITH_AS(read_nifti(p), doctest::Contains("datatype 64"), DataError);
}

TEST_CASE("nifti write to a missing directory fails")
{
    CHECK_THROWS_AS(write_nifti(Volume(cube(2)), temp_path("no_such_dir") / "x" / "v.nii"), DataError);
}

TEST_CASE("resample identity, constant and ramp")
{
    GridGeometry g = cube(8, 1.0);
    g.origin = {1.0, 2.0, 3.0};
    Volume ramp(g), constant(g, 7.0f);
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j)
            for (int i = 0; i < 8; ++i) ramp.at(i, j, k) = static_cast<float>(i);

    const Volume same = resample_trilinear(ramp, {1.0, 1.0, 1.0});
    CHECK(same.dims() == g.dims);
    CHECK(same == ramp);

    const Volume c2 = resample_trilinear(constant, {0.7, 1.3, 2.0});
    for (std::size_t i = 0; i < c2.size(); ++i) CHECK(c2[i] == doctest::Approx(7.0));

    const Volume down = resample_trilinear(ramp, {2.0, 2.0, 2.0});
    CHECK(down.dims() == std::array<int, 3>{4, 4, 4});
    // Output voxel i samples input index (i + 0.5) * 2 - 0.5 = 2i + 0.5.
    for (int i = 0; i < 4; ++i) CHECK(down.at(i, 1, 2) == doctest::Approx(2.0 * i + 0.5).epsilon(1e-6));
    CHECK(down.min() >= ramp.min());
    CHECK(down.max() <= ramp.max());
    CHECK_THROWS_AS(resample_trilinear(ramp, {0.0, 1.0, 1.0}), DataError);
}

TEST_CASE("resample output dims use the ceiling rule")
{
    GridGeometry g;
    g.dims = {10, 7, 3};
    g.spacing = {1.0, 1.0, 1.0};
    const Volume r = resample_trilinear(Volume(g), {0.52, 0.52, 0.52});
    CHECK(r.dims() == std::array<int, 3>{20, 14, 6});
    CHECK(r.spacing()[0] == doctest::Approx(0.52));
}

TEST_CASE("skull mask equals brute-force dilation of the largest component")
{
    Volume ct = shell_ct(40, 14.0, 11.0);
    ct.at(1, 1, 1) = 1800.0f; // disconnected speck
    Volume shell(ct.grid());
    const Volume clean = shell_ct(40, 14.0, 11.0);
    for (std::size_t i = 0; i < ct.size(); ++i) shell[i] = clean[i] >= 400.0f ? 1.0f : 0.0f;

    const Volume mask = extract_skull_mask(ct, 400.0, 4);
    CHECK(is_binary_mask(mask));
    CHECK(mask == brute_dilate(shell, 4));
    CHECK(mask.at(1, 1, 1) == 0.0f);

    const Volume undilated = extract_skull_mask(ct, 400.0, 0);
    CHECK(undilated == shell);
}

TEST_CASE("skull mask on an all-air volume is an error")
{
    CHECK_THROWS_WITH_AS(extract_skull_mask(Volume(cube(8), -1000.0f)), doctest::Contains("empty skull"), DataError);
}

TEST_CASE("clip_hu")
{
    Volume v(cube(2), 0.0f);
    v[0] = 3500.0f;
    v[1] = -2000.0f;
    v[2] = 123.0f;
    const Volume a = clip_hu(v, -1024.0, 2000.0);
    CHECK(a[0] == 2000.0f);
    CHECK(a[2] == 123.0f);
    const Volume b = clip_hu(v, -1024.0, 3071.0);
    CHECK(b[1] == -1024.0f);
    CHECK_THROWS_AS(clip_hu(v, 5.0, 5.0), DataError);
}

TEST_CASE("mae_in_mask")
{
    const GridGeometry g = cube(3);
    Volume a(g), b(g), m(g);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = static_cast<float>(i * 10);
        b[i] = static_cast<float>((i * i) % 17);
        m[i] = (i % 3 == 0) ? 1.0f : 0.0f;
    }
    // Hand sum over i = 0, 3, ..., 24: |10i - (i^2 mod 17)|.
    double sum = 0.0;
    int n = 0;
    for (int i = 0; i < 27; i += 3) {
        sum += std::abs(10.0 * i - static_cast<double>((i * i) % 17));
        ++n;
    }
    CHECK(mae_in_mask(a, b, m) == doctest::Approx(sum / n));
    CHECK(mae_in_mask(a, b, m) == doctest::Approx(mae_in_mask(b, a, m)));
    CHECK(mae_in_mask(a, a, m) == 0.0);

    Volume shifted = a;
    for (std::size_t i = 0; i < a.size(); ++i) shifted[i] += 10.0f;
    CHECK(mae_in_mask(a, shifted, m) == doctest::Approx(10.0));

    CHECK_THROWS_AS(mae_in_mask(a, b, Volume(g)), DataError);
    CHECK_THROWS_AS(mae_in_mask(a, Volume(cube(4)), m), DataError);
}
