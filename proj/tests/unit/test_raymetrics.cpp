#include <doctest.h>

#include <cmath>

#include "tfus/error.hpp"
#include "tfus/raymetrics.hpp"

using namespace tfus;

namespace {

struct Shell {
    Volume mask;
    Volume ct;
};

// Spherical shell about `c` (mm) on a centred grid; HU constant inside the shell.
Shell make_shell(double r_out, double r_in, double sp = 0.5, int n = 97, Vec3 c = {}, float hu = 1800.0f)
{
    GridGeometry g;
    g.dims = {n, n, n};
    g.spacing = {sp, sp, sp};
    const double h = -0.5 * (n - 1) * sp;
    g.origin = {h, h, h};
    Shell s{Volume(g), Volume(g)};
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double r = distance(g.world(i, j, k), c);
                if (r <= r_out && r >= r_in) {
                    s.mask.at(i, j, k) = 1.0f;
                    s.ct.at(i, j, k) = hu;
                }
            }
    return s;
}

} // namespace

TEST_CASE("radial rays through a spherical shell")
{
    // quarter-millimetre voxels keep the mask's own boundary error below half a ray step
    const Shell s = make_shell(20.05, 14.05, 0.25, 193);
    const Vec3 dirs[] = {{0, 0, 1}, {1, 0, 0}, {0, -1, 0}, {1, 1, 1}, {-0.3, 0.5, 0.8}, {0.7, -0.2, 0.4}};
    for (Vec3 d : dirs) {
        d = normalized(d);
        const auto rec = trace_ray(s.mask, s.ct, 40.0 * d, {0, 0, 0});
        CAPTURE(d.x);
        CAPTURE(d.y);
        CAPTURE(d.z);
        REQUIRE(rec.intersects);
        CHECK(std::abs(rec.thickness - 6.0) <= kDefaultRayStep);
        CHECK(rec.incidence_deg <= 2.0);
        CHECK(std::abs(distance(rec.entry, {}) - 20.05) <= 0.25);
        CHECK_FALSE(rec.hu_profile.empty());
    }
}

TEST_CASE("ray that misses the shell")
{
    const Shell s = make_shell(10.0, 6.0);
    // passes beside the shell and stops before reaching it
    const auto rec = trace_ray(s.mask, s.ct, {20.0, 20.0, 20.0}, {15.0, 15.0, 0.0});
    CHECK_FALSE(rec.intersects);
    CHECK_FALSE(rec.active);
    CHECK(rec.thickness == 0.0);
    CHECK_FALSE(rec.sdr.has_value());
}

TEST_CASE("oblique chord hits at 30 degrees")
{
    const Shell s = make_shell(20.0, 14.0);
    // vertical ray at x = R sin 30: the outward normal at entry is 30 deg from the ray
    const double x = 20.0 * std::sin(deg2rad(30.0));
    const auto rec = trace_ray(s.mask, s.ct, {x, 0.0, 40.0}, {x, 0.0, 0.0});
    REQUIRE(rec.intersects);
    CHECK(std::abs(rec.incidence_deg - 30.0) <= 3.0);
    const double chord = std::sqrt(400.0 - x * x) - std::sqrt(196.0 - x * x);
    CHECK(std::abs(rec.thickness - chord) <= 2.0 * kDefaultRayStep);
}

TEST_CASE("activation threshold around 20 degrees")
{
    const Shell s = make_shell(20.0, 14.0);
    for (double deg = 0.0; deg <= 40.0; deg += 1.0) {
        const double x = 20.0 * std::sin(deg2rad(deg));
        const auto rec = trace_ray(s.mask, s.ct, {x, 0.0, 40.0}, {x, 0.0, 0.0});
        CAPTURE(deg);
        REQUIRE(rec.intersects);
        CHECK(std::abs(rec.incidence_deg - deg) <= 3.0);
    }
}

TEST_CASE("ray SDR rule")
{
    CHECK(ray_sdr(std::vector<double>(9, 1800.0)) == 1.0);
    std::vector<double> layered;
    for (double v : {2000.0, 1000.0, 2000.0})
        for (int i = 0; i < 10; ++i) layered.push_back(v);
    CHECK(ray_sdr(layered) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(ray_sdr({}), DataError);
    CHECK_THROWS_AS(ray_sdr({0.0, -10.0, 0.0}), DataError);
    const double s = ray_sdr({100.0, 3000.0, -50.0, 20.0});
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
}

TEST_CASE("uniform shell gives full activation, exact thickness and unit SDR")
{
    const Shell s = make_shell(20.05, 14.05, 0.25, 193);
    const auto arr = make_hemisphere_array(60, 35.0, 4.0);
    const auto m = compute_skull_metrics(arr, s.mask, s.ct, {});
    CHECK(m.nae == 60);
    CHECK(std::abs(m.st_mean - 6.0) <= kDefaultRayStep);
    CHECK(m.sdr_mean == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& r : m.per_element) {
        CHECK(r.active == (r.intersects && r.incidence_deg < kActiveIncidenceDeg));
        REQUIRE(r.sdr.has_value());
        CHECK(*r.sdr >= 0.0);
        CHECK(*r.sdr <= 1.0);
    }
    const auto again = compute_skull_metrics(arr, s.mask, s.ct, {});
    CHECK(again.sdr_mean == m.sdr_mean);
    CHECK(again.st_mean == m.st_mean);
    CHECK(again.nae == m.nae);
}

TEST_CASE("zero active elements is an error")
{
    const Shell s = make_shell(20.0, 14.0);
    const auto arr = make_hemisphere_array(10, 35.0, 4.0);
    // focus far outside the shell so every ray misses
    auto posed = pose_array(arr, Pose{0, 0, 0, {100.0, 100.0, 100.0}});
    CHECK_THROWS_AS(compute_skull_metrics(posed, s.mask, s.ct, {100.0, 100.0, 100.0}), DataError);
    CHECK(count_active(trace_elements(posed, s.mask, s.ct, {100.0, 100.0, 100.0})) == 0);
}

TEST_CASE("NAE and thickness do not depend on HU scale")
{
    // off-centre shell so that some elements are inactive
    const Shell s = make_shell(20.0, 14.0, 0.5, 121, {9.0, 0.0, 0.0});
    const auto arr = make_hemisphere_array(80, 35.0, 4.0);
    const auto a = trace_elements(arr, s.mask, s.ct, {});
    Volume scaled = s.ct;
    for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= 0.6f;
    const auto b = trace_elements(arr, s.mask, scaled, {});
    const int nae = count_active(a);
    CHECK(nae > 0);
    CHECK(nae < 80);
    CHECK(count_active(b) == nae);
    for (std::size_t e = 0; e < a.size(); ++e) {
        CHECK(a[e].active == b[e].active);
        CHECK(a[e].thickness == b[e].thickness);
    }
}

TEST_CASE("element overlap")
{
    SkullMetrics a;
    a.per_element.resize(990);
    for (std::size_t i = 0; i < 990; ++i) {
        a.per_element[i].element_id = static_cast<int>(i);
        a.per_element[i].active = i % 3 == 0;
    }
    SkullMetrics b = a;
    CHECK(element_overlap(a, b) == 1.0);
    for (int i = 0; i < 11; ++i) b.per_element[static_cast<std::size_t>(i * 50)].active ^= true;
    CHECK(element_overlap(a, b) == doctest::Approx(979.0 / 990.0).epsilon(1e-15));
    SkullMetrics c = a;
    for (auto& r : c.per_element) r.active = !r.active;
    CHECK(element_overlap(a, c) == 0.0);
    SkullMetrics d = a;
    d.per_element.pop_back();
    CHECK_THROWS_AS(element_overlap(a, d), DataError);
    SkullMetrics e = a;
    e.per_element[3].element_id = 7;
    CHECK_THROWS_AS(element_overlap(a, e), DataError);
}

TEST_CASE("pose search on a centred shell returns no tilt")
{
    const Shell s = make_shell(20.0, 14.0);
    const auto arr = make_hemisphere_array(40, 35.0, 4.0);
    const Pose p = optimize_pose(arr, s.mask, s.ct, {}, 10.0, 5.0);
    CHECK(p.tilt_x == 0.0);
    CHECK(p.tilt_y == 0.0);
    const Pose z = optimize_pose(arr, s.mask, s.ct, {}, 0.0, 2.0);
    CHECK(z.tilt_x == 0.0);
    CHECK(z.tilt_y == 0.0);
}

TEST_CASE("pose search matches brute-force enumeration on an asymmetric shell")
{
    Shell s = make_shell(20.0, 14.0, 0.5, 97, {3.0, 0.0, 0.0});
    // thickened patch on the +x side
    const auto& g = s.mask.grid();
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                const Vec3 p = g.world(i, j, k);
                if (p.x > 8.0 && p.z > 5.0 && norm(p - Vec3{3.0, 0.0, 0.0}) <= 23.0 && p.z < 20.0) {
                    s.mask.at(i, j, k) = 1.0f;
                    s.ct.at(i, j, k) = 1800.0f;
                }
            }
    const auto arr = make_hemisphere_array(48, 35.0, 4.0);
    const double limit = 10.0, step = 5.0;
    const Pose best = optimize_pose(arr, s.mask, s.ct, {}, limit, step);
    CHECK(std::abs(best.tilt_x) <= limit);
    CHECK(std::abs(best.tilt_y) <= limit);

    const auto nae_at = [&](double tx, double ty) {
        const auto posed = pose_array(arr, Pose{tx, ty, 0.0, {}});
        return count_active(trace_elements(posed, s.mask, s.ct, {}));
    };
    int brute = -1;
    for (double tx = -limit; tx <= limit + 1e-9; tx += step)
        for (double ty = -limit; ty <= limit + 1e-9; ty += step) brute = std::max(brute, nae_at(tx, ty));
    const int chosen = nae_at(best.tilt_x, best.tilt_y);
    CHECK(chosen == brute);
    CHECK(chosen >= nae_at(0.0, 0.0));
}
