#include <doctest.h>

#include <cmath>
#include <random>

#include "tfus/acoustic_map.hpp"
#include "tfus/error.hpp"
#include "tfus/phantom.hpp"
#include "tfus/raymetrics.hpp"

using namespace tfus;

namespace {

// Quarter-millimetre grid holding a 20.05 mm shell of base thickness 6 mm.
PhantomSpec fine_spec()
{
    PhantomSpec s;
    s.grid.dims = {177, 177, 177};
    s.grid.spacing = {0.25, 0.25, 0.25};
    s.outer_radius = 20.05;
    s.base_thickness = 6.0;
    return s;
}

bool identical(const Volume& a, const Volume& b)
{
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

} // namespace

TEST_CASE("phantom tissue classes")
{
    PhantomSpec s;
    s.grid.dims = {64, 64, 64};
    s.outer_radius = 14.0;
    s.base_thickness = 4.0;
    s.trabecular_fraction = 0.5;
    const Volume ct = make_skull_phantom(s);
    const auto& g = s.grid;
    const WorldPoint c = s.centre();
    CHECK(c == g.world(31.5, 31.5, 31.5));
    // along +x from the centre: cavity, cortical, trabecular, cortical, air
    auto hu_at = [&](double r) {
        const auto idx = g.to_index(c + Vec3{r, 0.0, 0.0});
        return ct.at(static_cast<int>(std::lround(idx.x)), static_cast<int>(std::lround(idx.y)),
                     static_cast<int>(std::lround(idx.z)));
    };
    CHECK(hu_at(5.25) == 40.0f);
    CHECK(hu_at(10.25) == 1800.0f);
    CHECK(hu_at(11.75) == 900.0f);
    CHECK(hu_at(13.75) == 1800.0f);
    CHECK(hu_at(15.25) == -1000.0f);
    CHECK(ct.at(0, 0, 0) == -1000.0f);
}

TEST_CASE("phantom is seed-reproducible")
{
    PhantomSpec s;
    s.grid.dims = {48, 48, 48};
    s.outer_radius = 10.0;
    s.base_thickness = 3.0;
    s.noise_sigma = 30.0;
    s.seed = 7;
    s.modulation.push_back({{1.0, 0.0, 0.0}, 1.5, 40.0});
    CHECK(identical(make_skull_phantom(s), make_skull_phantom(s)));
    PhantomSpec other = s;
    other.seed = 8;
    CHECK_FALSE(identical(make_skull_phantom(s), make_skull_phantom(other)));
}

TEST_CASE("phantom spec validation")
{
    PhantomSpec s;
    s.grid.dims = {48, 48, 48};
    s.outer_radius = 10.0;
    s.base_thickness = 3.0;
    CHECK_NOTHROW(s.validate());
    auto bad = s;
    bad.base_thickness = 10.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = s;
    bad.cortical_hu = 2500.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = s;
    bad.modulation.push_back({{0, 0, 1}, -3.0, 30.0});
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = s;
    bad.outer_radius = 12.0;
    CHECK_THROWS_AS(make_skull_phantom(bad), DataError);
}

TEST_CASE("thickness lobes")
{
    PhantomSpec s;
    s.base_thickness = 4.0;
    s.modulation.push_back({{0, 0, 1}, 2.0, 30.0});
    s.modulation.push_back({{0, 0, -1}, -2.0, 30.0});
    CHECK(s.thickness({0, 0, 1}) == doctest::Approx(6.0));
    CHECK(s.thickness({0, 0, -1}) == doctest::Approx(2.0));
    CHECK(s.thickness({1, 0, 0}) == doctest::Approx(4.0));
    const double th = deg2rad(15.0);
    CHECK(s.thickness({std::sin(th), 0.0, std::cos(th)}) == doctest::Approx(5.0));
}

TEST_CASE("radial rays recover the base thickness")
{
    PhantomSpec s = fine_spec();
    s.trabecular_fraction = 0.0;
    const Volume ct = make_skull_phantom(s);
    const Volume mask = extract_skull_mask(ct, 400.0, 0);
    const WorldPoint c = s.centre();
    const Vec3 dirs[] = {{0, 0, 1}, {1, 0, 0}, {0, -1, 0}, {1, 1, 1}, {-0.3, 0.5, 0.8}};
    for (Vec3 d : dirs) {
        d = normalized(d);
        const auto rec = trace_ray(mask, ct, c + 21.5 * d, c);
        REQUIRE(rec.intersects);
        CHECK(std::abs(rec.thickness - s.base_thickness) <= kDefaultRayStep);
        // trabecular_fraction = 0 leaves a uniform profile
        CHECK(ray_sdr(rec.hu_profile) == doctest::Approx(1.0));
    }
}

TEST_CASE("thickness scaling shrinks ST by the same factor")
{
    const PhantomSpec s = fine_spec();
    const Volume ct = make_skull_phantom(s);
    const Volume thin = perturb_phantom(s, ct, 0.9, 0.0, 0);
    const auto arr = pose_array(make_hemisphere_array(40, 21.5, 3.0), Pose{0, 0, 0, s.centre()});
    const auto a = compute_skull_metrics(arr, extract_skull_mask(ct, 400.0, 0), ct, s.centre());
    const auto b = compute_skull_metrics(arr, extract_skull_mask(thin, 400.0, 0), thin, s.centre());
    CHECK(a.st_mean == doctest::Approx(6.0).epsilon(0.05));
    CHECK(std::abs(b.st_mean - 0.9 * a.st_mean) <= 2.0 * kDefaultRayStep);
    CHECK(b.st_mean < a.st_mean);
}

TEST_CASE("perturbation noise and identity")
{
    PhantomSpec s;
    s.grid.dims = {64, 64, 64};
    s.outer_radius = 14.0;
    s.base_thickness = 4.0;
    const Volume ct = make_skull_phantom(s);
    CHECK(identical(perturb_phantom(s, ct, 1.0, 0.0, 3), ct));
    const Volume noisy = perturb_phantom(s, ct, 1.0, 50.0, 3);
    const Volume mask = phantom_shell_mask(s);
    // folded-normal mean of N(0, 50)
    CHECK(mae_in_mask(ct, noisy, mask) == doctest::Approx(50.0 * std::sqrt(2.0 / kPi)).epsilon(0.10));
    CHECK(identical(noisy, perturb_phantom(s, ct, 1.0, 50.0, 3)));
    CHECK_THROWS_AS(perturb_phantom(s, ct, 0.0, 0.0, 0), ConfigError);
    CHECK_THROWS_AS(perturb_phantom(s, ct, -1.0, 0.0, 0), ConfigError);
}

TEST_CASE("randomised phantoms run through mask, medium and metrics")
{
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 4; ++trial) {
        PhantomSpec s;
        s.grid.dims = {56, 56, 56};
        s.outer_radius = 9.0 + 3.0 * u(rng);
        s.base_thickness = 1.5 + 2.0 * u(rng);
        s.trabecular_fraction = 0.6 * u(rng);
        s.noise_sigma = 40.0 * u(rng);
        s.seed = static_cast<std::uint64_t>(trial);
        s.modulation.push_back({{u(rng) - 0.5, u(rng) - 0.5, 1.0}, 1.0 * u(rng), 20.0 + 30.0 * u(rng)});
        CAPTURE(trial);
        const Volume ct = make_skull_phantom(s);
        const Volume mask = extract_skull_mask(ct, 400.0, 1);
        const Medium m = build_medium(ct, mask, 650e3);
        CHECK(count_nonzero(m.brain_mask) > 0);
        const auto arr = pose_array(make_hemisphere_array(30, 13.5, 2.0), Pose{0, 0, 0, s.centre()});
        const auto metrics = compute_skull_metrics(arr, extract_skull_mask(ct, 400.0, 0), ct, s.centre());
        CHECK(metrics.nae > 0);
        CHECK(metrics.st_mean > 0.0);
    }
}

TEST_CASE("thicker shells give larger ST")
{
    double previous = 0.0;
    for (double t : {2.0, 3.0, 4.0}) {
        PhantomSpec s;
        s.grid.dims = {64, 64, 64};
        s.outer_radius = 13.0;
        s.base_thickness = t;
        s.trabecular_fraction = 0.0;
        const Volume ct = make_skull_phantom(s);
        const auto arr = pose_array(make_hemisphere_array(30, 14.5, 2.0), Pose{0, 0, 0, s.centre()});
        const auto metrics = compute_skull_metrics(arr, extract_skull_mask(ct, 400.0, 0), ct, s.centre());
        CHECK(metrics.st_mean > previous);
        previous = metrics.st_mean;
    }
}
