#include "tfus/raymetrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "tfus/error.hpp"

namespace tfus {

namespace {

// Mask sample that reads as empty outside the lattice, so rays starting far
// outside a cropped CT do not pick up edge voxels.
double sample_mask(const Volume& mask, Vec3 world)
{
    const Vec3 idx = mask.grid().to_index(world);
    for (int a = 0; a < 3; ++a) {
        const int n = mask.dims()[a];
        if (idx[a] < -0.5 || idx[a] > n - 0.5) return 0.0;
    }
    return mask.sample_index(idx);
}

// A unit-voxel kernel leaves the terraces of a voxelised sphere visible
// (normals off by up to ~18 deg near the poles); 4 voxels keeps them within 3 deg.
constexpr double kNormalSigma = 4.0; // voxels

// Gradient (world units, 1/mm) of the Gaussian-smoothed mask. The kernel
// factorises, so the weights are tabulated once per axis.
Vec3 smoothed_gradient(const Volume& mask, Vec3 world)
{
    constexpr int kRadius = static_cast<int>(3.0 * kNormalSigma);
    constexpr int kWidth = 2 * kRadius + 2;
    const auto& g = mask.grid();
    const Vec3 x = g.to_index(world);
    std::array<int, 3> lo{};
    std::array<std::array<double, kWidth>, 3> w{};
    std::array<std::array<double, kWidth>, 3> dw{};
    for (int a = 0; a < 3; ++a) {
        lo[a] = static_cast<int>(std::floor(x[a])) - kRadius;
        for (int q = 0; q < kWidth; ++q) {
            const double r = x[a] - (lo[a] + q);
            w[a][q] = std::exp(-0.5 * r * r / (kNormalSigma * kNormalSigma));
            dw[a][q] = -r * w[a][q];
        }
    }
    Vec3 grad{};
    for (int qk = 0; qk < kWidth; ++qk) {
        const int k = lo[2] + qk;
        if (k < 0 || k >= g.dims[2]) continue;
        for (int qj = 0; qj < kWidth; ++qj) {
            const int j = lo[1] + qj;
            if (j < 0 || j >= g.dims[1]) continue;
            double sx = 0.0, s0 = 0.0;
            for (int qi = 0; qi < kWidth; ++qi) {
                const int i = lo[0] + qi;
                if (i < 0 || i >= g.dims[0]) continue;
                const double v = mask.at(i, j, k);
                sx += v * dw[0][qi];
                s0 += v * w[0][qi];
            }
            grad.x += sx * w[1][qj] * w[2][qk];
            grad.y += s0 * dw[1][qj] * w[2][qk];
            grad.z += s0 * w[1][qj] * dw[2][qk];
        }
    }
    return {grad.x / g.spacing[0], grad.y / g.spacing[1], grad.z / g.spacing[2]};
}

double crossing(double s0, double s1, double m0, double m1)
{
    const double t = (0.5 - m0) / (m1 - m0);
    return s0 + std::clamp(t, 0.0, 1.0) * (s1 - s0);
}

} // namespace

ElementRecord trace_ray(const Volume& skull_mask, const Volume& ct, WorldPoint origin, WorldPoint target,
                        double step)
{
    if (!(step > 0.0)) throw DataError("trace_ray: step must be positive");
    const double length = distance(origin, target);
    if (!(length > 0.0)) throw DataError("trace_ray: origin and target coincide");
    const Vec3 dir = (target - origin) / length;

    std::vector<double> s;
    const auto n_steps = static_cast<std::size_t>(std::floor(length / step));
    s.reserve(n_steps + 2);
    for (std::size_t i = 0; i <= n_steps; ++i) s.push_back(static_cast<double>(i) * step);
    if (length - s.back() > 1e-9) s.push_back(length);

    std::vector<double> m(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) m[i] = sample_mask(skull_mask, origin + s[i] * dir);

    ElementRecord rec;
    double s_entry = -1.0;
    if (m[0] >= 0.5) s_entry = 0.0;
    for (std::size_t i = 0; s_entry < 0.0 && i + 1 < s.size(); ++i)
        if (m[i] < 0.5 && m[i + 1] >= 0.5) s_entry = crossing(s[i], s[i + 1], m[i], m[i + 1]);
    if (s_entry < 0.0) return rec;

    double s_exit = length;
    for (std::size_t i = s.size() - 1; i > 0; --i) {
        if (s[i] <= s_entry) break;
        if (m[i - 1] >= 0.5 && m[i] < 0.5) {
            s_exit = crossing(s[i - 1], s[i], m[i - 1], m[i]);
            break;
        }
    }

    rec.intersects = true;
    rec.entry = origin + s_entry * dir;
    rec.exit = origin + s_exit * dir;
    rec.thickness = std::max(0.0, s_exit - s_entry);

    const Vec3 grad = smoothed_gradient(skull_mask, rec.entry);
    const double gnorm = norm(grad);
    rec.incidence_deg = gnorm > 0.0 ? rad2deg(std::acos(std::clamp(std::abs(dot(dir, grad)) / gnorm, 0.0, 1.0)))
                                    : 90.0;

    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] > s_entry && s[i] < s_exit) rec.hu_profile.push_back(ct.sample_world(origin + s[i] * dir));
    return rec;
}

double ray_sdr(const std::vector<double>& hu_profile)
{
    if (hu_profile.empty()) throw DataError("ray_sdr: empty HU profile");
    const double peak = *std::max_element(hu_profile.begin(), hu_profile.end());
    if (!(peak > 0.0)) throw DataError("ray_sdr: profile maximum is not positive");
    const std::size_t n = hu_profile.size();
    const std::size_t lo = n / 3;
    const std::size_t hi = n - n / 3;
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) sum += hu_profile[i];
    const double middle = sum / static_cast<double>(hi - lo);
    return std::clamp(middle / peak, 0.0, 1.0);
}

std::vector<ElementRecord> trace_elements(const ArrayTransducer& arr, const Volume& skull_mask, const Volume& ct,
                                          WorldPoint focus, double step)
{
    if (!same_grid(skull_mask.grid(), ct.grid()))
        throw DataError("trace_elements: skull mask and CT are on different grids");
    std::vector<ElementRecord> records(arr.count());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::size_t e = 0; e < arr.count(); ++e) {
        ElementRecord rec = trace_ray(skull_mask, ct, arr.elements[e].center, focus, step);
        rec.element_id = static_cast<int>(e);
        if (rec.intersects && !rec.hu_profile.empty()) {
            const double peak = *std::max_element(rec.hu_profile.begin(), rec.hu_profile.end());
            if (peak > 0.0) rec.sdr = ray_sdr(rec.hu_profile);
        }
        rec.active = rec.intersects && rec.incidence_deg < kActiveIncidenceDeg;
        records[e] = std::move(rec);
    }
    return records;
}

int count_active(const std::vector<ElementRecord>& records)
{
    return static_cast<int>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.active; }));
}

SkullMetrics compute_skull_metrics(const ArrayTransducer& arr, const Volume& skull_mask, const Volume& ct,
                                   WorldPoint focus, double step)
{
    SkullMetrics out;
    out.per_element = trace_elements(arr, skull_mask, ct, focus, step);
    double st = 0.0, sdr = 0.0;
    int n_sdr = 0;
    for (const auto& r : out.per_element) {
        if (!r.active) continue;
        ++out.nae;
        st += r.thickness;
        if (r.sdr) {
            sdr += *r.sdr;
            ++n_sdr;
        }
    }
    if (out.nae == 0) throw DataError("compute_skull_metrics: no active elements, aggregates undefined");
    out.st_mean = st / out.nae;
    out.sdr_mean = n_sdr > 0 ? sdr / n_sdr : 0.0;
    return out;
}

double element_overlap(const SkullMetrics& a, const SkullMetrics& b)
{
    if (a.per_element.size() != b.per_element.size())
        throw DataError("element_overlap: element counts differ");
    if (a.per_element.empty()) throw DataError("element_overlap: no elements");
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.per_element.size(); ++i) {
        if (a.per_element[i].element_id != b.per_element[i].element_id)
            throw DataError("element_overlap: element ids differ");
        if (a.per_element[i].active == b.per_element[i].active) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(a.per_element.size());
}

Pose optimize_pose(const ArrayTransducer& arr, const Volume& skull_mask, const Volume& ct, WorldPoint focus,
                   double limit_deg, double step_deg, double roll_deg)
{
    if (limit_deg < 0.0) throw ConfigError("optimize_pose: limit must be non-negative");
    if (!(step_deg > 0.0)) throw ConfigError("optimize_pose: step must be positive");

    std::vector<double> tilts{0.0};
    for (int i = 1; i * step_deg <= limit_deg + 1e-9; ++i) {
        tilts.push_back(i * step_deg);
        tilts.push_back(-i * step_deg);
    }
    std::sort(tilts.begin(), tilts.end());

    std::vector<Pose> candidates;
    for (double tx : tilts)
        for (double ty : tilts) candidates.push_back({tx, ty, roll_deg, focus});

    std::vector<int> nae(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c)
        nae[c] = count_active(trace_elements(pose_array(arr, candidates[c]), skull_mask, ct, focus));

    // Candidates are in lexicographic (tilt_x, tilt_y) order already.
    std::size_t best = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c) {
        const double mag_c = std::hypot(candidates[c].tilt_x, candidates[c].tilt_y);
        const double mag_b = std::hypot(candidates[best].tilt_x, candidates[best].tilt_y);
        if (nae[c] > nae[best] || (nae[c] == nae[best] && mag_c < mag_b - 1e-12)) best = c;
    }
    return candidates[best];
}

} // namespace tfus
