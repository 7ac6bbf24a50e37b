#include "tfus/transducer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tfus/error.hpp"

namespace tfus {

namespace {

// Area handed to each element when sizing the cap, in units of diameter^2.
constexpr double kAreaPerElement = 2.0;

std::vector<Element> spiral_layout(int n, double roc, double cap_polar_rad)
{
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    const double one_minus_cos = 1.0 - std::cos(cap_polar_rad);
    std::vector<Element> elems;
    elems.reserve(static_cast<std::size_t>(n));
    const auto place = [&](double theta, double phi) {
        const Vec3 dir{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
        elems.push_back({roc * dir, -dir});
    };
    const bool odd = (n % 2) == 1;
    if (odd) place(0.0, 0.0);
    const int pairs = n / 2;
    for (int j = 0; j < pairs; ++j) {
        // Pair j owns two equal-area slots; it sits at their shared centre.
        const double slot = (odd ? 1.0 : 0.0) + 2.0 * j + 1.0;
        const double cos_theta = 1.0 - one_minus_cos * slot / n;
        const double theta = std::acos(std::clamp(cos_theta, -1.0, 1.0));
        const double phi = 0.5 * golden * j;
        place(theta, phi);
        place(theta, phi + kPi);
    }
    return elems;
}

} // namespace

double min_pairwise_distance(const ArrayTransducer& arr)
{
    double best = std::numeric_limits<double>::infinity();
    const auto& e = arr.elements;
    for (std::size_t i = 0; i < e.size(); ++i)
        for (std::size_t j = i + 1; j < e.size(); ++j) best = std::min(best, distance(e[i].center, e[j].center));
    return best;
}

ArrayTransducer make_hemisphere_array(int n, double roc, double elem_diameter)
{
    if (n < 1) throw ConfigError("make_hemisphere_array: element count must be >= 1");
    if (!(roc > 0.0) || !(elem_diameter > 0.0))
        throw ConfigError("make_hemisphere_array: radius of curvature and element diameter must be positive");
    if (elem_diameter >= 2.0 * roc)
        throw ConfigError("make_hemisphere_array: element diameter exceeds the sphere");

    ArrayTransducer arr;
    arr.roc = roc;
    arr.elem_diameter = elem_diameter;
    if (n == 1) {
        arr.elements = spiral_layout(1, roc, 0.0);
        arr.cap_polar_deg = rad2deg(std::asin(0.5 * elem_diameter / roc));
        return arr;
    }

    const double hemisphere_area = 2.0 * kPi * roc * roc;
    const double wanted = n * kAreaPerElement * elem_diameter * elem_diameter;
    double polar_deg = wanted >= hemisphere_area ? 90.0 : rad2deg(std::acos(1.0 - wanted / hemisphere_area));
    while (true) {
        arr.elements = spiral_layout(n, roc, deg2rad(polar_deg));
        arr.cap_polar_deg = polar_deg;
        if (min_pairwise_distance(arr) > elem_diameter) return arr;
        if (polar_deg >= 90.0) break;
        polar_deg = std::min(90.0, polar_deg + 0.5);
    }
    std::ostringstream msg;
    msg << "make_hemisphere_array: cannot fit " << n << " elements of diameter " << elem_diameter
        << " mm on a hemisphere of radius " << roc << " mm";
    throw ConfigError(msg.str());
}

Mat3 pose_rotation(const Pose& pose)
{
    return rotation_y(deg2rad(pose.tilt_y)) * rotation_x(deg2rad(pose.tilt_x)) *
           rotation_z(deg2rad(pose.roll));
}

ArrayTransducer pose_array(const ArrayTransducer& arr, const Pose& pose)
{
    const Mat3 rot = pose_rotation(pose);
    ArrayTransducer out = arr;
    out.focus = pose.focus;
    out.axis = rot * arr.axis;
    for (std::size_t i = 0; i < arr.elements.size(); ++i) {
        const Vec3 rel = arr.elements[i].center - arr.focus;
        out.elements[i].center = pose.focus + rot * rel;
        out.elements[i].normal = rot * arr.elements[i].normal;
    }
    return out;
}

SourceMap rasterize_bowls(const ArrayTransducer& arr, const GridGeometry& grid)
{
    grid.validate();
    SourceMap map;
    map.mask = Volume(grid);
    map.labels.assign(grid.size(), -1);
    map.element_voxels.resize(arr.count());

    const double max_sp = std::max({grid.spacing[0], grid.spacing[1], grid.spacing[2]});
    const double half_shell = 0.5 * max_sp;
    const double half_aperture = 0.5 * arr.elem_diameter;

    for (std::size_t e = 0; e < arr.count(); ++e) {
        const Vec3 center = arr.elements[e].center;
        const Vec3 axis = normalized(center - arr.focus);
        const double reach = half_aperture + 2.0 * max_sp;
        std::array<int, 3> lo{};
        std::array<int, 3> hi{};
        for (int a = 0; a < 3; ++a) {
            const double c = (center[a] - grid.origin[a]) / grid.spacing[a];
            const double r = reach / grid.spacing[a];
            lo[a] = static_cast<int>(std::floor(c - r));
            hi[a] = static_cast<int>(std::ceil(c + r));
            // Singleton axes (2D/1D grids) cannot hold a cap.
            if (lo[a] < 0 || hi[a] > grid.dims[a] - 1) {
                std::ostringstream msg;
                msg << "rasterize_bowls: element " << e << " lies outside the grid";
                throw DataError(msg.str());
            }
        }
        for (int k = lo[2]; k <= hi[2]; ++k)
            for (int j = lo[1]; j <= hi[1]; ++j)
                for (int i = lo[0]; i <= hi[0]; ++i) {
                    const Vec3 p = grid.world(i, j, k);
                    const Vec3 rel = p - arr.focus;
                    if (std::abs(norm(rel) - arr.roc) > half_shell) continue;
                    const double along = dot(rel, axis);
                    if (along <= 0.0) continue;
                    const double lateral = norm(rel - along * axis);
                    if (lateral > half_aperture) continue;
                    const std::size_t idx = grid.index(i, j, k);
                    const std::int32_t prev = map.labels[idx];
                    if (prev >= 0) {
                        const double d_prev = distance(p, arr.elements[static_cast<std::size_t>(prev)].center);
                        if (distance(p, center) >= d_prev) continue;
                    }
                    map.labels[idx] = static_cast<std::int32_t>(e);
                    map.mask[idx] = 1.0f;
                }
    }
    for (std::size_t idx = 0; idx < map.labels.size(); ++idx)
        if (map.labels[idx] >= 0) map.element_voxels[static_cast<std::size_t>(map.labels[idx])].push_back(idx);
    for (std::size_t e = 0; e < arr.count(); ++e) {
        if (map.element_voxels[e].empty()) {
            std::ostringstream msg;
            msg << "rasterize_bowls: element " << e << " covers no voxel centre";
            throw DataError(msg.str());
        }
    }
    return map;
}

} // namespace tfus
