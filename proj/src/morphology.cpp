#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tfus/error.hpp"
#include "tfus/volume.hpp"

namespace tfus {

namespace {

std::vector<std::array<int, 3>> neighbor_offsets(int connectivity)
{
    std::vector<std::array<int, 3>> offs;
    for (int dk = -1; dk <= 1; ++dk)
        for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
                const int manhattan = std::abs(di) + std::abs(dj) + std::abs(dk);
                if (manhattan == 0) continue;
                if (connectivity == 6 && manhattan != 1) continue;
                offs.push_back({di, dj, dk});
            }
    return offs;
}

// 1D squared distance transform of a sampled function (Felzenszwalb & Huttenlocher).
// Samples equal to +inf are not parabola sites.
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    v.resize(n);
    z.resize(n + 1);
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        double s = -inf;
        while (k >= 0) {
            const int p = v[k];
            s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
                (2.0 * (q - p));
            if (s <= z[k])
                --k;
            else
                break;
        }
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -inf;
            z[1] = inf;
        } else {
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = inf;
        }
    }
    if (k < 0) {
        std::fill(d, d + n, inf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double diff = q - v[j];
        d[q] = diff * diff + f[v[j]];
    }
}

} // namespace

std::vector<std::int32_t> label_components(const Volume& mask, int connectivity, std::size_t* count)
{
    if (connectivity != 6 && connectivity != 26)
        throw DataError("label_components: connectivity must be 6 or 26");
    const auto& g = mask.grid();
    const auto offs = neighbor_offsets(connectivity);
    std::vector<std::int32_t> labels(mask.size(), 0);
    std::vector<std::size_t> queue;
    std::int32_t next = 0;
    for (std::size_t seed = 0; seed < mask.size(); ++seed) {
        if (mask[seed] == 0.0f || labels[seed] != 0) continue;
        ++next;
        labels[seed] = next;
        queue.clear();
        queue.push_back(seed);
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const auto [i, j, k] = g.coords(queue[head]);
            for (const auto& o : offs) {
                const int ni = i + o[0], nj = j + o[1], nk = k + o[2];
                if (!g.contains(ni, nj, nk)) continue;
                const std::size_t n = g.index(ni, nj, nk);
                if (mask[n] != 0.0f && labels[n] == 0) {
                    labels[n] = next;
                    queue.push_back(n);
                }
            }
        }
    }
    if (count) *count = static_cast<std::size_t>(next);
    return labels;
}

Volume largest_component(const Volume& mask)
{
    std::size_t n = 0;
    const auto labels = label_components(mask, 26, &n);
    Volume out(mask.grid());
    if (n == 0) return out;
    std::vector<std::size_t> sizes(n + 1, 0);
    for (auto l : labels) ++sizes[static_cast<std::size_t>(l)];
    std::size_t best = 1;
    for (std::size_t l = 2; l <= n; ++l)
        if (sizes[l] > sizes[best]) best = l;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (static_cast<std::size_t>(labels[i]) == best) out[i] = 1.0f;
    return out;
}

std::vector<double> squared_distance_transform(const Volume& mask)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    const auto& g = mask.grid();
    std::vector<double> dist(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) dist[i] = mask[i] != 0.0f ? 0.0 : inf;

    std::vector<int> v;
    std::vector<double> z;
    for (int axis = 0; axis < 3; ++axis) {
        const int n = g.dims[axis];
        if (n == 1) continue;
        std::vector<double> line(n), out(n);
        const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        for (int q2 = 0; q2 < g.dims[a2]; ++q2)
            for (int q1 = 0; q1 < g.dims[a1]; ++q1) {
                std::array<int, 3> c{};
                c[a1] = q1;
                c[a2] = q2;
                for (int q = 0; q < n; ++q) {
                    c[axis] = q;
                    line[q] = dist[g.index(c[0], c[1], c[2])];
                }
                edt_1d(line.data(), out.data(), n, v, z);
                for (int q = 0; q < n; ++q) {
                    c[axis] = q;
                    dist[g.index(c[0], c[1], c[2])] = out[q];
                }
            }
    }
    return dist;
}

Volume dilate_ball(const Volume& mask, int radius)
{
    if (radius < 0) throw DataError("dilate_ball: radius must be >= 0");
    const auto dist = squared_distance_transform(mask);
    const double r2 = static_cast<double>(radius) * radius;
    Volume out(mask.grid());
    for (std::size_t i = 0; i < dist.size(); ++i)
        if (dist[i] <= r2) out[i] = 1.0f;
    return out;
}

Volume exterior_region(const Volume& blocked)
{
    const auto& g = blocked.grid();
    const auto offs = neighbor_offsets(6);
    Volume outside(g);
    std::vector<std::size_t> queue;
    const auto push = [&](int i, int j, int k) {
        const std::size_t idx = g.index(i, j, k);
        if (blocked[idx] == 0.0f && outside[idx] == 0.0f) {
            outside[idx] = 1.0f;
            queue.push_back(idx);
        }
    };
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                const bool boundary = i == 0 || j == 0 || k == 0 || i == g.dims[0] - 1 ||
                                      j == g.dims[1] - 1 || k == g.dims[2] - 1;
                if (boundary) push(i, j, k);
            }
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto [i, j, k] = g.coords(queue[head]);
        for (const auto& o : offs) {
            const int ni = i + o[0], nj = j + o[1], nk = k + o[2];
            if (g.contains(ni, nj, nk)) push(ni, nj, nk);
        }
    }
    return outside;
}

} // namespace tfus
