#include "tfus/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tfus/error.hpp"

namespace tfus {

namespace {

constexpr double kHuMin = -1024.0;
constexpr double kHuMax = 2000.0;

void add_noise(Volume& v, double sigma, std::uint64_t seed)
{
    if (sigma <= 0.0) return;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = static_cast<float>(std::clamp(v[i] + noise(rng), kHuMin, kHuMax));
}

// 0 outside, 1 cavity, 2 cortical, 3 trabecular
int classify(const PhantomSpec& spec, WorldPoint c, WorldPoint p)
{
    const Vec3 d = p - c;
    const double r = norm(d);
    if (r > spec.outer_radius) return 0;
    const double t = r > 0.0 ? spec.thickness(d / r) : spec.base_thickness;
    const double inner = spec.outer_radius - t;
    if (r < inner) return 1;
    const double depth = (spec.outer_radius - r) / t;
    const double half = 0.5 * spec.trabecular_fraction;
    if (spec.trabecular_fraction > 0.0 && depth >= 0.5 - half && depth <= 0.5 + half) return 3;
    return 2;
}

} // namespace

WorldPoint PhantomSpec::centre() const
{
    if (center) return *center;
    return grid.world(0.5 * (grid.dims[0] - 1), 0.5 * (grid.dims[1] - 1), 0.5 * (grid.dims[2] - 1));
}

double PhantomSpec::thickness(Vec3 dir) const
{
    double t = base_thickness;
    for (const auto& lobe : modulation) {
        const double cosang = std::clamp(dot(dir, normalized(lobe.direction)), -1.0, 1.0);
        const double theta = rad2deg(std::acos(cosang));
        if (theta < lobe.width_deg) {
            const double s = std::cos(0.5 * kPi * theta / lobe.width_deg);
            t += lobe.amplitude * s * s;
        }
    }
    return t;
}

void PhantomSpec::validate() const
{
    grid.validate();
    if (!(outer_radius > 0.0)) throw ConfigError("phantom: outer_radius must be positive");
    if (!(base_thickness > 0.0) || !(base_thickness < outer_radius))
        throw ConfigError("phantom: need outer_radius > base_thickness > 0");
    if (!(trabecular_fraction >= 0.0 && trabecular_fraction < 1.0))
        throw ConfigError("phantom: trabecular_fraction must lie in [0, 1)");
    for (double hu : {cortical_hu, trabecular_hu, air_hu, tissue_hu})
        if (!(hu >= kHuMin && hu <= kHuMax)) throw ConfigError("phantom: HU values must lie in [-1024, 2000]");
    if (!(noise_sigma >= 0.0)) throw ConfigError("phantom: noise_sigma must be >= 0");
    double thick = base_thickness, thin = base_thickness;
    for (const auto& lobe : modulation) {
        if (!(norm(lobe.direction) > 0.0)) throw ConfigError("phantom: lobe direction must be nonzero");
        if (!(lobe.width_deg > 0.0 && lobe.width_deg <= 180.0))
            throw ConfigError("phantom: lobe width must lie in (0, 180] deg");
        (lobe.amplitude > 0.0 ? thick : thin) += lobe.amplitude;
    }
    if (!(thin > 0.0) || !(thick < outer_radius))
        throw ConfigError("phantom: modulated thickness must stay within (0, outer_radius)");
    const WorldPoint c = centre();
    for (int a = 0; a < 3; ++a) {
        const double lo = grid.origin[a];
        const double hi = grid.origin[a] + (grid.dims[a] - 1) * grid.spacing[a];
        if (c[a] - outer_radius < lo || c[a] + outer_radius > hi)
            throw DataError("phantom: shell exceeds the grid");
    }
}

Volume make_skull_phantom(const PhantomSpec& spec)
{
    spec.validate();
    const auto& g = spec.grid;
    const WorldPoint c = spec.centre();
    Volume v(g);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                double hu = spec.air_hu;
                switch (classify(spec, c, g.world(i, j, k))) {
                case 1:
                    hu = spec.tissue_hu;
                    break;
                case 2:
                    hu = spec.cortical_hu;
                    break;
                case 3:
                    hu = spec.trabecular_hu;
                    break;
                default:
                    break;
                }
                v.at(i, j, k) = static_cast<float>(hu);
            }
    add_noise(v, spec.noise_sigma, spec.seed);
    return v;
}

Volume perturb_phantom(const PhantomSpec& spec, const Volume& ct, double thickness_scale, double hu_noise_sigma,
                       std::uint64_t seed)
{
    if (!(thickness_scale > 0.0)) throw ConfigError("perturb_phantom: thickness scale must be positive");
    if (!(hu_noise_sigma >= 0.0)) throw ConfigError("perturb_phantom: noise sigma must be >= 0");
    if (!same_grid(ct.grid(), spec.grid)) throw DataError("perturb_phantom: CT grid does not match the phantom spec");
    Volume out = ct;
    if (thickness_scale != 1.0) {
        PhantomSpec scaled = spec;
        scaled.base_thickness *= thickness_scale;
        for (auto& lobe : scaled.modulation) lobe.amplitude *= thickness_scale;
        out = make_skull_phantom(scaled);
    }
    add_noise(out, hu_noise_sigma, seed);
    return out;
}

Volume phantom_shell_mask(const PhantomSpec& spec)
{
    spec.validate();
    const auto& g = spec.grid;
    const WorldPoint c = spec.centre();
    Volume m(g);
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                if (classify(spec, c, g.world(i, j, k)) >= 2) m.at(i, j, k) = 1.0f;
    return m;
}

} // namespace tfus
