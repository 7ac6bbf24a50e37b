#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tfus/geometry.hpp"

namespace tfus {

/// Voxel lattice: dims, spacing (mm) and the world position of voxel (0,0,0).
/// Linear index is i + nx * (j + ny * k).
struct GridGeometry {
    std::array<int, 3> dims{1, 1, 1};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    Vec3 origin{};

    std::size_t size() const
    {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) +
                                                    static_cast<std::size_t>(dims[1]) * k);
    }
    std::array<int, 3> coords(std::size_t idx) const
    {
        const auto nx = static_cast<std::size_t>(dims[0]);
        const auto ny = static_cast<std::size_t>(dims[1]);
        return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny),
                static_cast<int>(idx / (nx * ny))};
    }
    bool contains(int i, int j, int k) const
    {
        return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
    }
    Vec3 world(double i, double j, double k) const
    {
        return {origin.x + i * spacing[0], origin.y + j * spacing[1], origin.z + k * spacing[2]};
    }
    /// Continuous index-space coordinates of a world point.
    Vec3 to_index(Vec3 p) const
    {
        return {(p.x - origin.x) / spacing[0], (p.y - origin.y) / spacing[1],
                (p.z - origin.z) / spacing[2]};
    }
    double voxel_volume() const { return spacing[0] * spacing[1] * spacing[2]; }

    friend bool operator==(const GridGeometry&, const GridGeometry&) = default;

    /// Throws DataError unless dims >= 1 and spacing > 0.
    void validate() const;
};

bool same_grid(const GridGeometry& a, const GridGeometry& b, double tol = 1e-6);

/// Scalar voxel volume with value semantics. Data is float32, x fastest.
class Volume {
public:
    Volume() = default;
    explicit Volume(GridGeometry grid, float fill = 0.0f);
    Volume(GridGeometry grid, std::vector<float> data);

    const GridGeometry& grid() const { return grid_; }
    const std::array<int, 3>& dims() const { return grid_.dims; }
    const std::array<double, 3>& spacing() const { return grid_.spacing; }
    std::size_t size() const { return data_.size(); }

    float& operator[](std::size_t idx) { return data_[idx]; }
    float operator[](std::size_t idx) const { return data_[idx]; }
    float& at(int i, int j, int k) { return data_[grid_.index(i, j, k)]; }
    float at(int i, int j, int k) const { return data_[grid_.index(i, j, k)]; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    /// Trilinear sample at continuous index coordinates; clamps to the edge voxels.
    double sample_index(Vec3 idx) const;
    double sample_world(Vec3 p) const { return sample_index(grid_.to_index(p)); }

    float min() const;
    float max() const;

    friend bool operator==(const Volume&, const Volume&) = default;

private:
    GridGeometry grid_;
    std::vector<float> data_;
};

/// True when every voxel is exactly 0 or 1.
bool is_binary_mask(const Volume& v);
std::size_t count_nonzero(const Volume& v);

// File I/O: single-file NIfTI-1, little-endian, int16 or float32 in, float32 out.
Volume read_nifti(const std::filesystem::path& path);
void write_nifti(const Volume& vol, const std::filesystem::path& path);

/// Trilinear resampling onto a lattice sharing the input's outer corner.
/// Output dims are ceil(dims * spacing / new_spacing).
Volume resample_trilinear(const Volume& vol, std::array<double, 3> new_spacing);

/// Elementwise clamp to [lo, hi].
Volume clip_hu(const Volume& ct, double lo, double hi);

/// Threshold, keep the largest 26-connected component, then dilate with a
/// Euclidean ball of radius `dilation_radius` voxels. Throws DataError when no
/// voxel reaches the threshold.
Volume extract_skull_mask(const Volume& ct, double threshold = 400.0, int dilation_radius = 4);

/// Mean |a - b| over voxels where mask == 1.
double mae_in_mask(const Volume& a, const Volume& b, const Volume& mask);

// Morphology helpers used by the operations above.

/// Largest 26-connected component of the nonzero voxels; ties go to the
/// component whose first voxel (linear order) comes first.
Volume largest_component(const Volume& mask);

/// Labels 26-connected components (0 = background, 1.. in discovery order).
std::vector<std::int32_t> label_components(const Volume& mask, int connectivity, std::size_t* count);

/// Binary dilation by a Euclidean ball (voxel-center distance <= radius, voxel units).
Volume dilate_ball(const Volume& mask, int radius);

/// Squared Euclidean distance (voxel units) from every voxel to the nearest
/// nonzero voxel. Voxels with no feature get +inf.
std::vector<double> squared_distance_transform(const Volume& mask);

/// Voxels where `blocked` is zero and which can be reached from the grid
/// boundary through 6-connected non-blocked voxels.
Volume exterior_region(const Volume& blocked);

} // namespace tfus
