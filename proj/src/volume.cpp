#include "tfus/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tfus/error.hpp"

namespace tfus {

void GridGeometry::validate() const
{
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1) {
            std::ostringstream msg;
            msg << "grid dimension " << a << " must be positive, got " << dims[a];
            throw DataError(msg.str());
        }
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
            std::ostringstream msg;
            msg << "grid spacing " << a << " must be positive, got " << spacing[a];
            throw DataError(msg.str());
        }
    }
    if (!origin.finite()) throw DataError("grid origin must be finite");
}

bool same_grid(const GridGeometry& a, const GridGeometry& b, double tol)
{
    if (a.dims != b.dims) return false;
    for (int i = 0; i < 3; ++i) {
        if (std::abs(a.spacing[i] - b.spacing[i]) > tol) return false;
        if (std::abs(a.origin[i] - b.origin[i]) > tol) return false;
    }
    return true;
}

Volume::Volume(GridGeometry grid, float fill) : grid_(grid)
{
    grid_.validate();
    data_.assign(grid_.size(), fill);
}

Volume::Volume(GridGeometry grid, std::vector<float> data) : grid_(grid), data_(std::move(data))
{
    grid_.validate();
    if (data_.size() != grid_.size()) {
        std::ostringstream msg;
        msg << "volume data length " << data_.size() << " does not match dims product "
            << grid_.size();
        throw DataError(msg.str());
    }
}

double Volume::sample_index(Vec3 idx) const
{
    std::array<int, 3> i0{};
    std::array<int, 3> i1{};
    std::array<double, 3> f{};
    for (int a = 0; a < 3; ++a) {
        const int n = grid_.dims[a];
        double c = std::clamp(idx[a], 0.0, static_cast<double>(n - 1));
        int lo = static_cast<int>(std::floor(c));
        if (lo >= n - 1) lo = std::max(n - 2, 0);
        i0[a] = lo;
        i1[a] = std::min(lo + 1, n - 1);
        f[a] = c - lo;
    }
    const auto v = [&](int i, int j, int k) { return static_cast<double>(at(i, j, k)); };
    const double c00 = v(i0[0], i0[1], i0[2]) * (1 - f[0]) + v(i1[0], i0[1], i0[2]) * f[0];
    const double c10 = v(i0[0], i1[1], i0[2]) * (1 - f[0]) + v(i1[0], i1[1], i0[2]) * f[0];
    const double c01 = v(i0[0], i0[1], i1[2]) * (1 - f[0]) + v(i1[0], i0[1], i1[2]) * f[0];
    const double c11 = v(i0[0], i1[1], i1[2]) * (1 - f[0]) + v(i1[0], i1[1], i1[2]) * f[0];
    const double c0 = c00 * (1 - f[1]) + c10 * f[1];
    const double c1 = c01 * (1 - f[1]) + c11 * f[1];
    return c0 * (1 - f[2]) + c1 * f[2];
}

float Volume::min() const { return data_.empty() ? 0.0f : *std::min_element(data_.begin(), data_.end()); }
float Volume::max() const { return data_.empty() ? 0.0f : *std::max_element(data_.begin(), data_.end()); }

bool is_binary_mask(const Volume& v)
{
    return std::all_of(v.data().begin(), v.data().end(),
                       [](float x) { return x == 0.0f || x == 1.0f; });
}

std::size_t count_nonzero(const Volume& v)
{
    return static_cast<std::size_t>(
        std::count_if(v.data().begin(), v.data().end(), [](float x) { return x != 0.0f; }));
}

Volume resample_trilinear(const Volume& vol, std::array<double, 3> new_spacing)
{
    for (int a = 0; a < 3; ++a)
        if (!(new_spacing[a] > 0.0)) throw DataError("resample_trilinear: new spacing must be positive");

    const auto& in = vol.grid();
    GridGeometry out;
    out.spacing = new_spacing;
    for (int a = 0; a < 3; ++a) {
        const double extent = in.dims[a] * in.spacing[a];
        // Guard against ceil(2.0000000001) style round-off.
        out.dims[a] = std::max(1, static_cast<int>(std::ceil(extent / new_spacing[a] - 1e-9)));
        out.origin[a] = in.origin[a] - 0.5 * in.spacing[a] + 0.5 * new_spacing[a];
    }
    Volume result(out);
    std::array<double, 3> ratio{};
    for (int a = 0; a < 3; ++a) ratio[a] = new_spacing[a] / in.spacing[a];

#pragma omp parallel for schedule(static)
    for (int k = 0; k < out.dims[2]; ++k)
        for (int j = 0; j < out.dims[1]; ++j)
            for (int i = 0; i < out.dims[0]; ++i) {
                const Vec3 src{(i + 0.5) * ratio[0] - 0.5, (j + 0.5) * ratio[1] - 0.5,
                               (k + 0.5) * ratio[2] - 0.5};
                result.at(i, j, k) = static_cast<float>(vol.sample_index(src));
            }
    return result;
}

Volume clip_hu(const Volume& ct, double lo, double hi)
{
    if (!(lo < hi)) throw DataError("clip_hu: lower bound must be below upper bound");
    Volume out = ct;
    const auto flo = static_cast<float>(lo);
    const auto fhi = static_cast<float>(hi);
    for (float& v : out.data()) v = std::clamp(v, flo, fhi);
    return out;
}

Volume extract_skull_mask(const Volume& ct, double threshold, int dilation_radius)
{
    if (dilation_radius < 0) throw DataError("extract_skull_mask: dilation radius must be >= 0");
    Volume mask(ct.grid());
    bool any = false;
    for (std::size_t i = 0; i < ct.size(); ++i) {
        if (ct[i] >= threshold) {
            mask[i] = 1.0f;
            any = true;
        }
    }
    if (!any) {
        std::ostringstream msg;
        msg << "empty skull: no voxel at or above " << threshold << " HU";
        throw DataError(msg.str());
    }
    mask = largest_component(mask);
    if (dilation_radius > 0) mask = dilate_ball(mask, dilation_radius);
    return mask;
}

double mae_in_mask(const Volume& a, const Volume& b, const Volume& mask)
{
    if (!same_grid(a.grid(), b.grid()) || !same_grid(a.grid(), mask.grid()))
        throw DataError("mae_in_mask: volumes are on different grids");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (mask[i] == 1.0f) {
            sum += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
            ++n;
        }
    }
    if (n == 0) throw DataError("mae_in_mask: mask is empty");
    return sum / static_cast<double>(n);
}

} // namespace tfus
