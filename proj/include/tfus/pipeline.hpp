#pragma once

#include <optional>
#include <vector>

#include "tfus/acoustic_map.hpp"
#include "tfus/config.hpp"
#include "tfus/correction.hpp"
#include "tfus/metrics.hpp"
#include "tfus/raymetrics.hpp"
#include "tfus/solver.hpp"
#include "tfus/transducer.hpp"

namespace tfus {

/// CT after clipping and resampling, with its bone masks.
struct PreparedCt {
    Volume ct;         // HU, clipped to [clip_lo, clip_hi]
    Volume bone_mask;  // largest component of ct >= threshold, undilated
    Volume skull_mask; // bone_mask dilated by dilation_radius
};

PreparedCt prepare_ct(const Volume& raw_ct, const PreprocessConfig& pp);

/// Array template from the config (focus at the origin, pole along +z).
ArrayTransducer make_array(const ArrayConfig& a);

/// Fixed pose when given, otherwise the NAE-maximising tilt search.
Pose choose_pose(const RunConfig& cfg, const ArrayTransducer& templ, const PreparedCt& ct, WorldPoint target);

struct PlanResult {
    Pose pose;
    ArrayTransducer array; // posed
    SkullMetrics metrics;
};

PlanResult plan_sonication(const RunConfig& cfg, const PreparedCt& ct, WorldPoint target);

/// Everything a run on one simulation grid needs.
struct Scene {
    Volume ct;        // HU on the simulation grid (air outside the CT), sim clip applied
    Volume bone_mask; // undilated
    Medium medium;
    ArrayTransducer array; // posed
    Pose pose;
    SourceMap sources;
    WorldPoint target{};
    std::vector<ElementRecord> rays; // per element, empty in free field
    MaterialConstants materials;
    bool free_field = false;
};

struct SceneSettings {
    double spacing_mm = 0.52;
    int pml_thickness = 10;
    int margin_voxels = 2;
    double sim_clip_hi_hu = 2000.0;
    double f0 = 650e3;
    double ray_step_mm = kDefaultRayStep;
    MaterialConstants materials;
};

SceneSettings scene_settings(const RunConfig& cfg);

/// Pads the CT lattice (air) until it holds the whole posed array plus margin
/// and PML, with FFT-friendly dimensions, then builds the medium and sources.
Scene build_scene(const PreparedCt& ct, const ArrayTransducer& posed, const Pose& pose, WorldPoint target,
                  const SceneSettings& s);

/// Water-only scene around a posed array; the peak search region is the ball
/// of radius roc/2 about the geometric focus.
Scene build_free_field_scene(const ArrayTransducer& posed, const Pose& pose, WorldPoint target,
                             const SceneSettings& s);

struct ModeResult {
    CorrectionMode mode = CorrectionMode::none;
    CorrectionResult correction;
    SourceDrive drive;
    PressureField field;
    FocalReport focal;
};

struct ModeSettings {
    SimParams sim;
    bool disable_inactive = false;
    double focal_threshold = 0.5;
};

/// Phases for the requested mode. Time reversal runs the point-source
/// simulation first.
CorrectionResult compute_correction(const Scene& scene, CorrectionMode mode, const SimParams& sim);

SourceDrive make_drive(const Scene& scene, const CorrectionResult& corr, const ModeSettings& ms);

ModeResult run_mode(const Scene& scene, CorrectionMode mode, const ModeSettings& ms);

std::vector<CorrectionMode> modes_from_config(const std::string& correction);

} // namespace tfus
