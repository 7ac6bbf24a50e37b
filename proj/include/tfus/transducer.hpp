#pragma once

#include <cstdint>
#include <vector>

#include "tfus/geometry.hpp"
#include "tfus/volume.hpp"

namespace tfus {

struct Element {
    WorldPoint center; // mm
    Vec3 normal;       // unit, points at the geometric focus
};

/// Spherical-cap phased array. Every element sits on the sphere of radius
/// `roc` about `focus`.
struct ArrayTransducer {
    double roc = 150.0;          // mm
    double elem_diameter = 8.0;  // mm
    WorldPoint focus{};          // geometric focus
    Vec3 axis{0.0, 0.0, 1.0};    // pole direction, focus -> cap center
    double cap_polar_deg = 0.0;  // polar extent of the layout
    std::vector<Element> elements;

    std::size_t count() const { return elements.size(); }
};

/// Rigid placement: roll about the pole axis, then tilt about world x, then
/// world y, all about the focus, which is then moved to `focus`. Degrees.
struct Pose {
    double tilt_x = 0.0;
    double tilt_y = 0.0;
    double roll = 0.0;
    WorldPoint focus{};
};

/// Deterministic layout on a cap around +z (focus at the origin): an
/// antipodally paired golden-angle spiral, with a pole element for odd n.
/// Throws ConfigError when n elements of the given diameter cannot fit on a
/// hemisphere without overlapping.
ArrayTransducer make_hemisphere_array(int n = 990, double roc = 150.0, double elem_diameter = 8.0);

/// Rigidly moves the array (see Pose).
ArrayTransducer pose_array(const ArrayTransducer& arr, const Pose& pose);

Mat3 pose_rotation(const Pose& pose);

/// Labelled one-voxel source shells on a grid.
struct SourceMap {
    Volume mask;                                     // 1 on source voxels
    std::vector<std::int32_t> labels;                // element id per voxel, -1 elsewhere
    std::vector<std::vector<std::size_t>> element_voxels; // ascending linear indices
    std::size_t element_count() const { return element_voxels.size(); }
};

/// Marks voxels whose centre lies within half a voxel of the array sphere and
/// within elem_diameter/2 of each element's axis. Voxels claimed twice go to
/// the element with the nearer centre. Throws DataError when an element's cap
/// does not fit inside the grid.
SourceMap rasterize_bowls(const ArrayTransducer& arr, const GridGeometry& grid);

/// Minimum pairwise element-centre distance (mm); +inf for fewer than two elements.
double min_pairwise_distance(const ArrayTransducer& arr);

} // namespace tfus
