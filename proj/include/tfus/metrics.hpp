#pragma once

#include <array>
#include <optional>
#include <vector>

#include "tfus/volume.hpp"

namespace tfus {

struct FocalReport {
    double peak_pressure = 0.0; // Pa
    WorldPoint peak_location{};
    double target_pressure = 0.0; // Pa
    double focal_shift = 0.0;     // mm
    double focal_volume = 0.0;    // mm^3
    std::array<double, 3> focal_dims{}; // mm
    double threshold = 0.5;       // fraction of peak defining the focal region
};

struct ComparisonReport {
    double peak_diff_pct = 0.0;
    double target_diff_pct = 0.0;
    Vec3 peak_distance_vector{}; // other - ref, mm
    double peak_distance = 0.0;  // mm
    double focal_volume_diff_pct = 0.0;
    std::optional<double> mae_hu;
};

/// Peak is searched inside brain_mask only. The focal region is the
/// 26-connected component holding the peak among voxels >= threshold * peak.
FocalReport focal_metrics(const Volume& rms, WorldPoint target, const Volume& brain_mask, double threshold = 0.5);

/// Percent differences use `ref` as the denominator.
ComparisonReport compare_fields(const FocalReport& ref, const FocalReport& other);

double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct WilcoxonResult {
    double w_plus = 0.0; // sum of ranks of positive differences
    double p = 1.0;      // two-sided
    int n = 0;           // pairs left after dropping zero differences
    bool exact = true;
};

/// Signed-rank test on xs - ys with mid-ranks for ties. Exact null
/// distribution for n <= 20, normal approximation above. Throws DataError
/// when fewer than 5 nonzero differences remain.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& xs, const std::vector<double>& ys);

} // namespace tfus
