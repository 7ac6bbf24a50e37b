#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "tfus/acoustic_map.hpp"
#include "tfus/phantom.hpp"
#include "tfus/solver.hpp"
#include "tfus/transducer.hpp"

namespace tfus {

constexpr int kConfigVersion = 1;

struct ArrayConfig {
    int n = 990;
    double roc_mm = 150.0;
    double element_diameter_mm = 8.0;
};

struct PoseSearchConfig {
    double limit_deg = 10.0;
    double step_deg = 2.0;
    double roll_deg = 0.0;
};

struct PreprocessConfig {
    double threshold_hu = 400.0;
    int dilation_radius = 4;
    double clip_lo_hu = -1024.0;
    double clip_hi_hu = 3071.0;
    double sim_clip_hi_hu = 2000.0;
    double spacing_mm = 0.52;
};

struct PerturbConfig {
    double thickness_scale = 1.0;
    double noise_sigma_hu = 0.0;
    std::uint64_t seed = 0;
};

struct PhantomConfig {
    PhantomSpec spec;
    std::optional<PerturbConfig> perturb;
};

struct CompareConfig {
    std::filesystem::path run_a;
    std::filesystem::path run_b;
    std::optional<std::filesystem::path> study_csv;
    std::string label;
};

struct RunConfig {
    int config_version = kConfigVersion;
    std::optional<std::filesystem::path> ct;
    std::optional<std::filesystem::path> ct_b;
    std::optional<WorldPoint> target;
    MaterialConstants materials;
    ArrayConfig array;
    std::optional<Pose> pose; // fixed pose; focus is taken from target
    PoseSearchConfig pose_search;
    PreprocessConfig preprocess;
    double ray_step_mm = 0.25;
    SimParams sim;
    int margin_voxels = 2;
    std::string correction = "none"; // none | kranion | time_reversal | all
    bool disable_inactive = false;
    double focal_threshold = 0.5;
    std::filesystem::path output_dir = "tfus_out";
    std::uint64_t seed = 0;
    std::optional<CompareConfig> compare;
    std::optional<PhantomConfig> phantom;

    void validate() const;
};

/// Parses a JSON config. Unknown keys, wrong types and out-of-range values
/// raise ConfigError. Relative input paths resolve against `base_dir`.
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// output_dir, re-rooted under $TFUS_OUTPUT_ROOT when that is set and the
/// configured directory is relative.
std::filesystem::path resolve_output_dir(const RunConfig& cfg);

} // namespace tfus
