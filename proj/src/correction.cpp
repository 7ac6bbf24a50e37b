#include "tfus/correction.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include "tfus/error.hpp"

namespace tfus {

std::string to_string(CorrectionMode mode)
{
    switch (mode) {
    case CorrectionMode::none:
        return "none";
    case CorrectionMode::kranion:
        return "kranion";
    case CorrectionMode::time_reversal:
        return "time_reversal";
    }
    return "none";
}

CorrectionMode parse_correction_mode(const std::string& s)
{
    if (s == "none") return CorrectionMode::none;
    if (s == "kranion") return CorrectionMode::kranion;
    if (s == "time_reversal" || s == "tr") return CorrectionMode::time_reversal;
    throw ConfigError("unknown correction mode '" + s + "' (expected none, kranion or time_reversal)");
}

std::vector<double> kranion_travel_times(const std::vector<double>& thickness_mm, double roc_mm, double c_water,
                                         double c_skull_mean)
{
    if (!(c_water > 0.0) || !(c_skull_mean > 0.0)) throw DataError("kranion: sound speeds must be positive");
    if (!(roc_mm > 0.0)) throw DataError("kranion: roc must be positive");
    std::vector<double> t(thickness_mm.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double d = thickness_mm[k];
        if (!(d >= 0.0) || d >= roc_mm) {
            std::ostringstream msg;
            msg << "kranion: element " << k << " thickness " << d << " mm outside [0, roc)";
            throw DataError(msg.str());
        }
        t[k] = (roc_mm - d) * 1e-3 / c_water + d * 1e-3 / c_skull_mean;
    }
    return t;
}

std::vector<double> kranion_delays(const std::vector<double>& thickness_mm, double roc_mm, double c_water,
                                   double c_skull_mean, const std::vector<bool>& active)
{
    if (!active.empty() && active.size() != thickness_mm.size())
        throw DataError("kranion: active flags do not match the element count");
    const auto t = kranion_travel_times(thickness_mm, roc_mm, c_water, c_skull_mean);
    const auto is_active = [&](std::size_t k) { return active.empty() || active[k]; };
    double t_min = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < t.size(); ++k)
        if (is_active(k)) t_min = std::min(t_min, t[k]);
    std::vector<double> delays(t.size(), 0.0);
    if (!std::isfinite(t_min)) return delays;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (is_active(k)) delays[k] = t[k] - t_min;
    return delays;
}

std::vector<double> delays_to_phases(const std::vector<double>& delays, double f0)
{
    std::vector<double> phases(delays.size());
    for (std::size_t k = 0; k < delays.size(); ++k) phases[k] = wrap_phase(2.0 * kPi * f0 * delays[k]);
    return phases;
}

double mean_skull_speed(const Medium& medium)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < medium.skull_mask.size(); ++i) {
        if (medium.skull_mask[i] != 0.0f) {
            sum += medium.c[i];
            ++n;
        }
    }
    if (n == 0) throw DataError("mean_skull_speed: empty skull mask");
    return sum / static_cast<double>(n);
}

double circular_mean(const std::vector<double>& angles)
{
    if (angles.empty()) throw DataError("circular_mean: no angles");
    std::complex<double> acc{};
    for (double a : angles) acc += std::polar(1.0, a);
    if (std::abs(acc) < 1e-12 * static_cast<double>(angles.size()))
        throw DataError("circular_mean: phases cancel, mean undefined");
    return std::arg(acc);
}

std::vector<double> time_reversal_phases(const ElementRecordings& recordings)
{
    const std::size_t n = recordings.series.size();
    if (n == 0) throw DataError("time_reversal: no element recordings");
    std::vector<double> psi(n);
    for (std::size_t e = 0; e < n; ++e) {
        if (recordings.series[e].empty()) {
            std::ostringstream msg;
            msg << "time_reversal: missing recording for element " << e;
            throw DataError(msg.str());
        }
        std::vector<double> voxel_phase;
        voxel_phase.reserve(recordings.series[e].size());
        for (const auto& s : recordings.series[e])
            voxel_phase.push_back(extract_amp_phase(s, recordings.f0, recordings.dt).phase);
        psi[e] = circular_mean(voxel_phase);
    }
    const double mean = circular_mean(psi);
    std::vector<double> phases(n);
    for (std::size_t e = 0; e < n; ++e) phases[e] = wrap_phase(-(psi[e] - mean));
    return phases;
}

} // namespace tfus
