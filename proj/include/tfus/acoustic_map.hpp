#pragma once

#include <string>
#include <vector>

#include "tfus/volume.hpp"

namespace tfus {

/// Tissue constants. Speeds m/s, densities kg/m^3, absorption dB/(MHz cm).
struct MaterialConstants {
    double c_water = 1500.0;
    double c_brain = 1560.0;
    double c_bone = 3100.0;
    double rho_water = 1000.0;
    double rho_brain = 1030.0;
    double rho_bone = 2200.0;
    double alpha_water = 0.0;
    double alpha_brain = 0.38;
    double alpha_bone_min = 0.2;
    double alpha_bone_max = 8.0;

    void validate() const;
};

struct SkullProperties {
    double rho;   // kg/m^3
    double c;     // m/s
    double alpha; // dB/(MHz cm)
};

/// Co-registered acoustic property maps on the simulation grid.
struct Medium {
    Volume c;        // m/s
    Volume rho;      // kg/m^3
    Volume alpha_np; // Np/m at the carrier frequency
    double c_ref = 0.0;
    Volume skull_mask;
    /// Intracranial region. Free-field media mark the whole grid.
    Volume brain_mask;
    std::vector<std::string> diagnostics;

    const GridGeometry& grid() const { return c.grid(); }
};

/// Linear HU-to-porosity map, clamped to [0, 1].
double porosity(double hu, double hu_max);

/// Porosity-weighted mix of water and bone; absorption grows with sqrt(porosity).
SkullProperties skull_properties(double phi, const MaterialConstants& mat);

/// dB/(MHz cm) at f0 (Hz) to Np/m.
double db_per_mhz_cm_to_np_per_m(double alpha_db, double f0);

/// Skull voxels take porosity-mapped properties (hu_max = max HU inside the
/// mask), the enclosed cavity takes brain properties, everything else water.
/// `ct` is expected to be clipped to [-1024, 2000] HU already.
Medium build_medium(const Volume& ct, const Volume& skull_mask, double f0,
                    const MaterialConstants& mat = {});

/// Homogeneous water medium; brain_mask covers the whole grid.
Medium water_medium(const GridGeometry& grid, double f0, const MaterialConstants& mat = {});

} // namespace tfus
