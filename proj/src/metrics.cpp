#include "tfus/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "tfus/error.hpp"

namespace tfus {

FocalReport focal_metrics(const Volume& rms, WorldPoint target, const Volume& brain_mask, double threshold)
{
    const auto& g = rms.grid();
    if (!same_grid(g, brain_mask.grid())) throw DataError("focal_metrics: field and brain mask grids differ");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("focal_metrics: threshold must lie in (0, 1)");
    if (!target.finite()) throw DataError("focal_metrics: target is not finite");
    const Vec3 ti = g.to_index(target);
    const int ti0 = static_cast<int>(std::lround(ti.x));
    const int tj0 = static_cast<int>(std::lround(ti.y));
    const int tk0 = static_cast<int>(std::lround(ti.z));
    if (!g.contains(ti0, tj0, tk0)) throw DataError("focal_metrics: target outside the grid");
    if (brain_mask.at(ti0, tj0, tk0) == 0.0f) throw DataError("focal_metrics: target outside the brain mask");

    std::size_t peak_idx = 0;
    float peak = -1.0f;
    for (std::size_t i = 0; i < rms.size(); ++i) {
        if (brain_mask[i] != 0.0f && rms[i] > peak) {
            peak = rms[i];
            peak_idx = i;
        }
    }
    if (!(peak > 0.0f)) throw DataError("focal_metrics: field is zero inside the brain mask");

    FocalReport r;
    r.threshold = threshold;
    r.peak_pressure = peak;
    const auto pc = g.coords(peak_idx);
    r.peak_location = g.world(pc[0], pc[1], pc[2]);
    r.target_pressure = rms.sample_world(target);
    r.focal_shift = distance(r.peak_location, target);

    // Flood the -6 dB (by default) region from the peak.
    const float level = static_cast<float>(threshold * peak);
    std::vector<std::uint8_t> seen(rms.size(), 0);
    std::queue<std::size_t> queue;
    queue.push(peak_idx);
    seen[peak_idx] = 1;
    std::size_t count = 0;
    std::array<int, 3> lo = pc, hi = pc;
    while (!queue.empty()) {
        const std::size_t idx = queue.front();
        queue.pop();
        ++count;
        const auto c = g.coords(idx);
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], c[a]);
            hi[a] = std::max(hi[a], c[a]);
        }
        for (int dk = -1; dk <= 1; ++dk)
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    const int i = c[0] + di, j = c[1] + dj, k = c[2] + dk;
                    if (!g.contains(i, j, k)) continue;
                    const std::size_t n = g.index(i, j, k);
                    if (seen[n] || rms[n] < level) continue;
                    seen[n] = 1;
                    queue.push(n);
                }
    }
    r.focal_volume = static_cast<double>(count) * g.voxel_volume();
    for (int a = 0; a < 3; ++a) r.focal_dims[a] = (hi[a] - lo[a] + 1) * g.spacing[a];
    return r;
}

ComparisonReport compare_fields(const FocalReport& ref, const FocalReport& other)
{
    if (!(ref.peak_pressure > 0.0)) throw DataError("compare_fields: reference peak pressure is zero");
    ComparisonReport c;
    c.peak_diff_pct = 100.0 * std::abs(ref.peak_pressure - other.peak_pressure) / ref.peak_pressure;
    c.target_diff_pct =
        ref.target_pressure > 0.0 ? 100.0 * std::abs(ref.target_pressure - other.target_pressure) / ref.target_pressure
                                  : 0.0;
    c.peak_distance_vector = other.peak_location - ref.peak_location;
    c.peak_distance = norm(c.peak_distance_vector);
    c.focal_volume_diff_pct =
        ref.focal_volume > 0.0 ? 100.0 * std::abs(ref.focal_volume - other.focal_volume) / ref.focal_volume : 0.0;
    return c;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys)
{
    if (xs.size() != ys.size()) throw DataError("pearson: length mismatch");
    if (xs.size() < 2) throw DataError("pearson: need at least two pairs");
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw DataError("pearson: degenerate variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

// Mid-ranks of |d|, doubled so they are integers.
std::vector<int> doubled_ranks(const std::vector<double>& absd)
{
    std::vector<std::size_t> order(absd.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return absd[a] < absd[b]; });
    std::vector<int> r2(absd.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && absd[order[j + 1]] == absd[order[i]]) ++j;
        // positions i..j (0-based) share rank ((i+1)+(j+1))/2
        const int doubled = static_cast<int>(i + j + 2);
        for (std::size_t q = i; q <= j; ++q) r2[order[q]] = doubled;
        i = j + 1;
    }
    return r2;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& xs, const std::vector<double>& ys)
{
    if (xs.size() != ys.size()) throw DataError("wilcoxon: length mismatch");
    std::vector<double> d;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double v = xs[i] - ys[i];
        if (!std::isfinite(v)) throw DataError("wilcoxon: non-finite difference");
        if (v != 0.0) d.push_back(v);
    }
    if (d.size() < 5) throw DataError("wilcoxon: fewer than 5 nonzero differences");

    std::vector<double> absd(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) absd[i] = std::abs(d[i]);
    const auto r2 = doubled_ranks(absd);

    WilcoxonResult res;
    res.n = static_cast<int>(d.size());
    int w2 = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0.0) w2 += r2[i];
    res.w_plus = 0.5 * w2;

    if (res.n <= 20) {
        // counts[s] = number of sign patterns with doubled W+ == s.
        const int total = std::accumulate(r2.begin(), r2.end(), 0);
        std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
        counts[0] = 1.0;
        int reach = 0;
        for (int r : r2) {
            for (int s = reach; s >= 0; --s)
                if (counts[s] != 0.0) counts[static_cast<std::size_t>(s + r)] += counts[s];
            reach += r;
        }
        const double all = std::ldexp(1.0, res.n);
        double lower = 0.0, upper = 0.0;
        for (int s = 0; s <= total; ++s) {
            if (s <= w2) lower += counts[s];
            if (s >= w2) upper += counts[s];
        }
        res.p = std::min(1.0, 2.0 * std::min(lower, upper) / all);
        res.exact = true;
    } else {
        const double n = res.n;
        const double mean = n * (n + 1.0) / 4.0;
        double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
        // Tie correction: sum (t^3 - t) / 48 over tie groups.
        std::vector<int> sorted = r2;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i);
            var -= (t * t * t - t) / 48.0;
            i = j;
        }
        const double z = (res.w_plus - mean) / std::sqrt(var);
        res.p = std::min(1.0, 2.0 * normal_cdf(-std::abs(z)));
        res.exact = false;
    }
    return res;
}

} // namespace tfus
