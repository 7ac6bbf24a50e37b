#pragma once

#include <string>
#include <vector>

#include "tfus/acoustic_map.hpp"
#include "tfus/solver.hpp"

namespace tfus {

enum class CorrectionMode { none, kranion, time_reversal };

std::string to_string(CorrectionMode mode);
/// Accepts "none", "kranion", "time_reversal" (alias "tr"); ConfigError otherwise.
CorrectionMode parse_correction_mode(const std::string& s);

// Sign conventions, in one place:
//   delay -> phase:  phi_k = +2 pi f0 dt_k   (a later-arriving path fires earlier)
//   time reversal:   phi_k = -(psi_k - mean psi)
// Drive is A cos(2 pi f0 t + phi), so a larger phi is a phase lead.

struct CorrectionResult {
    CorrectionMode mode = CorrectionMode::none;
    std::vector<double> delays; // s, kranion mode only
    std::vector<double> phases; // rad
    std::vector<bool> flagged;  // kranion: element was inactive and got zero delay
    double c_skull_mean = 0.0;  // m/s, kranion mode only
};

/// Travel time along each element ray: (R - d)/c_water + d/c_skull (seconds,
/// thicknesses in mm, roc in mm).
std::vector<double> kranion_travel_times(const std::vector<double>& thickness_mm, double roc_mm, double c_water,
                                         double c_skull_mean);

/// Travel times offset so the earliest active element has zero delay.
/// Elements with active[k] == false get delay 0. An empty `active` means all
/// active.
std::vector<double> kranion_delays(const std::vector<double>& thickness_mm, double roc_mm, double c_water,
                                   double c_skull_mean, const std::vector<bool>& active = {});

std::vector<double> delays_to_phases(const std::vector<double>& delays, double f0);

/// Arithmetic mean of c over the skull mask.
double mean_skull_speed(const Medium& medium);

/// Angle of the mean unit phasor; throws DataError for an empty or
/// degenerate (zero-resultant) set.
double circular_mean(const std::vector<double>& angles);

std::vector<double> time_reversal_phases(const ElementRecordings& recordings);

} // namespace tfus
