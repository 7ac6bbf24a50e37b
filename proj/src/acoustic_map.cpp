#include "tfus/acoustic_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tfus/error.hpp"

namespace tfus {

void MaterialConstants::validate() const
{
    for (double v : {c_water, c_brain, c_bone})
        if (!(v > 0.0)) throw ConfigError("material sound speeds must be positive");
    for (double v : {rho_water, rho_brain, rho_bone})
        if (!(v > 0.0)) throw ConfigError("material densities must be positive");
    if (alpha_water < 0.0 || alpha_brain < 0.0 || alpha_bone_min < 0.0)
        throw ConfigError("material absorption must be non-negative");
    if (!(alpha_bone_min < alpha_bone_max))
        throw ConfigError("alpha_bone_min must be below alpha_bone_max");
}

double porosity(double hu, double hu_max)
{
    if (!(hu_max > 0.0)) throw DataError("porosity: hu_max must be positive");
    return std::clamp(1.0 - hu / hu_max, 0.0, 1.0);
}

SkullProperties skull_properties(double phi, const MaterialConstants& mat)
{
    if (!(phi >= 0.0 && phi <= 1.0)) {
        std::ostringstream msg;
        msg << "skull_properties: porosity " << phi << " outside [0, 1]";
        throw DataError(msg.str());
    }
    return {mat.rho_water * phi + mat.rho_bone * (1.0 - phi),
            mat.c_water * phi + mat.c_bone * (1.0 - phi),
            mat.alpha_bone_min + (mat.alpha_bone_max - mat.alpha_bone_min) * std::sqrt(phi)};
}

double db_per_mhz_cm_to_np_per_m(double alpha_db, double f0)
{
    return alpha_db * (f0 * 1e-6) * (100.0 / 20.0) * std::log(10.0);
}

Medium build_medium(const Volume& ct, const Volume& skull_mask, double f0, const MaterialConstants& mat)
{
    mat.validate();
    if (!same_grid(ct.grid(), skull_mask.grid()))
        throw DataError("build_medium: CT and skull mask are on different grids");
    if (!(f0 > 0.0)) throw ConfigError("build_medium: f0 must be positive");

    double hu_max = -std::numeric_limits<double>::infinity();
    std::size_t n_skull = 0;
    for (std::size_t i = 0; i < ct.size(); ++i) {
        if (skull_mask[i] != 0.0f) {
            hu_max = std::max(hu_max, static_cast<double>(ct[i]));
            ++n_skull;
        }
    }
    if (n_skull == 0) throw DataError("build_medium: skull mask is empty");
    if (!(hu_max > 0.0)) throw DataError("build_medium: maximum HU inside the skull mask is not positive");

    Medium m;
    m.skull_mask = skull_mask;
    const Volume outside = exterior_region(skull_mask);
    m.brain_mask = Volume(ct.grid());
    std::size_t n_brain = 0;
    for (std::size_t i = 0; i < ct.size(); ++i) {
        if (skull_mask[i] == 0.0f && outside[i] == 0.0f) {
            m.brain_mask[i] = 1.0f;
            ++n_brain;
        }
    }
    if (n_brain == 0)
        m.diagnostics.push_back("warning: no enclosed cavity found (open skull shell); non-skull voxels set to water");

    m.c = Volume(ct.grid(), static_cast<float>(mat.c_water));
    m.rho = Volume(ct.grid(), static_cast<float>(mat.rho_water));
    m.alpha_np = Volume(ct.grid(), static_cast<float>(db_per_mhz_cm_to_np_per_m(mat.alpha_water, f0)));
    const auto brain_alpha = static_cast<float>(db_per_mhz_cm_to_np_per_m(mat.alpha_brain, f0));
    for (std::size_t i = 0; i < ct.size(); ++i) {
        if (skull_mask[i] != 0.0f) {
            const auto p = skull_properties(porosity(ct[i], hu_max), mat);
            m.c[i] = static_cast<float>(p.c);
            m.rho[i] = static_cast<float>(p.rho);
            m.alpha_np[i] = static_cast<float>(db_per_mhz_cm_to_np_per_m(p.alpha, f0));
        } else if (m.brain_mask[i] != 0.0f) {
            m.c[i] = static_cast<float>(mat.c_brain);
            m.rho[i] = static_cast<float>(mat.rho_brain);
            m.alpha_np[i] = brain_alpha;
        }
    }
    m.c_ref = m.c.max();
    return m;
}

Medium water_medium(const GridGeometry& grid, double f0, const MaterialConstants& mat)
{
    mat.validate();
    Medium m;
    m.c = Volume(grid, static_cast<float>(mat.c_water));
    m.rho = Volume(grid, static_cast<float>(mat.rho_water));
    m.alpha_np = Volume(grid, static_cast<float>(db_per_mhz_cm_to_np_per_m(mat.alpha_water, f0)));
    m.c_ref = mat.c_water;
    m.skull_mask = Volume(grid);
    m.brain_mask = Volume(grid, 1.0f);
    return m;
}

} // namespace tfus
