#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tfus/volume.hpp"

namespace tfus {

/// Local thickening (amplitude > 0) or thinning of the shell around a direction.
/// Profile: amplitude * cos^2(pi/2 * theta / width) for theta < width.
struct ThicknessLobe {
    Vec3 direction{0.0, 0.0, 1.0};
    double amplitude = 0.0; // mm
    double width_deg = 30.0;
};

struct PhantomSpec {
    GridGeometry grid{{96, 96, 96}, {0.5, 0.5, 0.5}, {0.0, 0.0, 0.0}};
    std::optional<WorldPoint> center; // defaults to the grid centre
    double outer_radius = 20.0;       // mm
    double base_thickness = 4.0;      // mm
    double cortical_hu = 1800.0;
    double trabecular_hu = 900.0;
    double trabecular_fraction = 0.4; // of the local thickness, centred
    std::vector<ThicknessLobe> modulation;
    double noise_sigma = 0.0; // HU
    std::uint64_t seed = 0;
    double air_hu = -1000.0;
    double tissue_hu = 40.0;

    WorldPoint centre() const;
    /// Shell thickness (mm) along a unit direction from the centre.
    double thickness(Vec3 dir) const;
    /// Throws ConfigError for inconsistent values, DataError when the shell
    /// does not fit inside the grid.
    void validate() const;
};

Volume make_skull_phantom(const PhantomSpec& spec);

/// Counterpart of a phantom made from `spec`: thickness (base and lobes)
/// scaled by `thickness_scale`, then independent N(0, hu_noise_sigma) noise
/// from `seed` added and clipped to [-1024, 2000]. With scale 1 the input CT
/// is reused as is.
Volume perturb_phantom(const PhantomSpec& spec, const Volume& ct, double thickness_scale, double hu_noise_sigma,
                       std::uint64_t seed);

/// Undilated bone mask of the analytic shell (voxel centres inside the shell).
Volume phantom_shell_mask(const PhantomSpec& spec);

} // namespace tfus
