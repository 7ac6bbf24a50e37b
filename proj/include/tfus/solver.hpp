#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tfus/acoustic_map.hpp"
#include "tfus/transducer.hpp"
#include "tfus/volume.hpp"

namespace tfus {

struct SimParams {
    double f0 = 650e3;            // Hz
    int n_cycles = 100;
    double cfl = 0.3;
    double ppw_min = 4.3;         // below this a warning is recorded
    int pml_thickness = 10;       // voxels
    double pml_alpha = 2.0;       // Np per grid point at the outer edge
    int rms_window_cycles = 20;
    double amplitude = 1.0;       // Pa per element
    std::array<bool, 3> pml_axes{true, true, true};

    void validate() const;
};

/// Per-element amplitude (Pa) and phase (rad); drive is A cos(2 pi f0 t + phi).
struct SourceDrive {
    std::vector<double> amplitude;
    std::vector<double> phase;

    static SourceDrive uniform(std::size_t n, double amplitude);
};

/// Extra run-time instrumentation, not part of the physical setup.
struct SimOptions {
    std::vector<std::size_t> probe_voxels; // record p(t) at these voxels
    bool record_energy = false;            // discrete acoustic energy at every step
    double source_off_cycles = 0.0;        // > 0: stop driving after this many cycles
};

struct PressureField {
    Volume rms; // Pa
    SimParams params;
    double dt = 0.0;         // s
    int steps = 0;
    int rms_steps = 0;
    double ppw = 0.0;        // in the slowest medium
    double c_ref = 0.0;
    std::vector<std::string> warnings;
    double runtime_s = 0.0;
    std::vector<std::vector<float>> probe_series; // sample n at t = n dt
    std::vector<double> energy;                   // J per metre^(3-D); entry n at t = n dt
};

/// Per-element, per-voxel pressure series from a point source at the target.
struct ElementRecordings {
    double dt = 0.0;
    double f0 = 0.0;
    std::vector<std::vector<std::vector<float>>> series; // [element][voxel][sample], sample n at t = n dt
};

struct AmpPhase {
    double amplitude = 0.0;
    double phase = 0.0;
};

/// Time step and step count a run with these inputs will use.
double stable_time_step(const Medium& medium, const SimParams& params);
int total_steps(double dt, const SimParams& params);

/// Linear k-space pseudospectral run with labelled monochromatic sources.
/// Returns the RMS pressure over the final rms_window_cycles.
PressureField simulate(const Medium& medium, const SourceMap& sources, const SourceDrive& drive,
                       const SimParams& params, const SimOptions& options = {});

/// Drives a point source at the voxel nearest `target` and records every
/// element voxel. The point source phase is offset so that its far field in
/// 3D reads as amplitude * cos(2 pi f0 (t - r / c)).
ElementRecordings record_point_source(const Medium& medium, WorldPoint target, const SourceMap& elements,
                                      const SimParams& params);

/// Amplitude and phase of the f0 component of a series sampled at t = n dt.
/// Drops the first third, keeps a whole number of carrier periods, applies a
/// periodic Hann window and evaluates the carrier bin.
AmpPhase extract_amp_phase(std::span<const float> series, double f0, double dt);

/// Damping rate (1/s) giving spatial amplitude attenuation `alpha_np` (Np/m) at
/// angular frequency omega for sound speed c.
double damping_rate(double alpha_np, double c, double omega);

/// Smallest n' >= n whose prime factors are all in {2, 3, 5}.
int fft_friendly_size(int n);

/// Number of worker threads used by the solver and parallel loops.
void set_thread_count(int threads);

} // namespace tfus
