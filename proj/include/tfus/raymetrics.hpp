#pragma once

#include <optional>
#include <vector>

#include "tfus/transducer.hpp"
#include "tfus/volume.hpp"

namespace tfus {

/// Result of marching one element-to-focus ray through the skull mask.
struct ElementRecord {
    int element_id = -1;
    bool intersects = false;
    WorldPoint entry{};
    WorldPoint exit{};
    double thickness = 0.0;     // mm
    double incidence_deg = 0.0; // angle to the surface normal at entry
    std::optional<double> sdr;  // empty when the ray misses or the profile is unusable
    bool active = false;
    std::vector<double> hu_profile;
};

struct SkullMetrics {
    double sdr_mean = 0.0;
    double st_mean = 0.0; // mm
    int nae = 0;
    std::vector<ElementRecord> per_element;
};

constexpr double kActiveIncidenceDeg = 20.0;
constexpr double kDefaultRayStep = 0.25; // mm

/// Marches origin -> target sampling the mask trilinearly every `step` mm.
/// Entry/exit are the first rising and last falling 0.5-crossings; the
/// incidence angle uses the gradient of the mask smoothed with a 4-voxel
/// Gaussian. `element_id`, `sdr` and `active` are left for the caller.
ElementRecord trace_ray(const Volume& skull_mask, const Volume& ct, WorldPoint origin, WorldPoint target,
                        double step = kDefaultRayStep);

/// Middle-tertile mean over the profile maximum, clamped to [0, 1].
double ray_sdr(const std::vector<double>& hu_profile);

/// Per-element rays to the focus plus active-element aggregates. Throws
/// DataError when no element is active.
SkullMetrics compute_skull_metrics(const ArrayTransducer& arr, const Volume& skull_mask, const Volume& ct,
                                   WorldPoint focus, double step = kDefaultRayStep);

/// Per-element records only; never throws for zero active elements.
std::vector<ElementRecord> trace_elements(const ArrayTransducer& arr, const Volume& skull_mask,
                                          const Volume& ct, WorldPoint focus, double step = kDefaultRayStep);

int count_active(const std::vector<ElementRecord>& records);

/// Fraction of elements whose active flags agree.
double element_overlap(const SkullMetrics& a, const SkullMetrics& b);

/// Exhaustive tilt search (roll fixed) maximising active elements. Ties go to
/// the smallest tilt magnitude, then lexicographic (tilt_x, tilt_y).
Pose optimize_pose(const ArrayTransducer& arr, const Volume& skull_mask, const Volume& ct, WorldPoint focus,
                   double limit_deg = 10.0, double step_deg = 2.0, double roll_deg = 0.0);

} // namespace tfus
