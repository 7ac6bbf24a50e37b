#include "tfus/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "tfus/error.hpp"

namespace tfus {

namespace {

constexpr float kAirHu = -1000.0f;

bool isotropic(const GridGeometry& g)
{
    return std::abs(g.spacing[0] - g.spacing[1]) <= 1e-9 * g.spacing[0] &&
           std::abs(g.spacing[0] - g.spacing[2]) <= 1e-9 * g.spacing[0];
}

struct Box {
    Vec3 lo{1e300, 1e300, 1e300};
    Vec3 hi{-1e300, -1e300, -1e300};
    void add(Vec3 p, double pad = 0.0)
    {
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a] - pad);
            hi[a] = std::max(hi[a], p[a] + pad);
        }
    }
};

Box array_box(const ArrayTransducer& arr, double sp)
{
    Box b;
    const double pad = 0.5 * arr.elem_diameter + 2.0 * sp;
    for (const auto& e : arr.elements) b.add(e.center, pad);
    return b;
}

// Lattice through `anchor` with spacing sp covering `box`, padded and FFT-friendly.
GridGeometry padded_lattice(const Box& box, Vec3 anchor, double sp, int pad_voxels)
{
    GridGeometry g;
    g.spacing = {sp, sp, sp};
    for (int a = 0; a < 3; ++a) {
        int lo = static_cast<int>(std::floor((box.lo[a] - anchor[a]) / sp + 1e-9)) - pad_voxels;
        const int hi = static_cast<int>(std::ceil((box.hi[a] - anchor[a]) / sp - 1e-9)) + pad_voxels;
        const int n = hi - lo + 1;
        const int nf = fft_friendly_size(n);
        lo -= (nf - n) / 2;
        g.dims[a] = nf;
        g.origin[a] = anchor[a] + lo * sp;
    }
    return g;
}

} // namespace

PreparedCt prepare_ct(const Volume& raw_ct, const PreprocessConfig& pp)
{
    PreparedCt out;
    Volume clipped = clip_hu(raw_ct, pp.clip_lo_hu, pp.clip_hi_hu);
    const auto& sp = clipped.spacing();
    const bool same = std::abs(sp[0] - pp.spacing_mm) < 1e-9 && std::abs(sp[1] - pp.spacing_mm) < 1e-9 &&
                      std::abs(sp[2] - pp.spacing_mm) < 1e-9;
    out.ct = same ? std::move(clipped) : resample_trilinear(clipped, {pp.spacing_mm, pp.spacing_mm, pp.spacing_mm});
    out.bone_mask = extract_skull_mask(out.ct, pp.threshold_hu, 0);
    out.skull_mask = pp.dilation_radius > 0 ? dilate_ball(out.bone_mask, pp.dilation_radius) : out.bone_mask;
    return out;
}

ArrayTransducer make_array(const ArrayConfig& a)
{
    return make_hemisphere_array(a.n, a.roc_mm, a.element_diameter_mm);
}

Pose choose_pose(const RunConfig& cfg, const ArrayTransducer& templ, const PreparedCt& ct, WorldPoint target)
{
    if (cfg.pose) {
        Pose p = *cfg.pose;
        p.focus = target;
        return p;
    }
    return optimize_pose(templ, ct.bone_mask, ct.ct, target, cfg.pose_search.limit_deg, cfg.pose_search.step_deg,
                         cfg.pose_search.roll_deg);
}

PlanResult plan_sonication(const RunConfig& cfg, const PreparedCt& ct, WorldPoint target)
{
    const ArrayTransducer templ = make_array(cfg.array);
    PlanResult r;
    r.pose = choose_pose(cfg, templ, ct, target);
    r.array = pose_array(templ, r.pose);
    r.metrics.per_element = trace_elements(r.array, ct.bone_mask, ct.ct, target, cfg.ray_step_mm);
    r.metrics.nae = count_active(r.metrics.per_element);
    if (r.metrics.nae > 0) r.metrics = compute_skull_metrics(r.array, ct.bone_mask, ct.ct, target, cfg.ray_step_mm);
    return r;
}

SceneSettings scene_settings(const RunConfig& cfg)
{
    SceneSettings s;
    s.spacing_mm = cfg.preprocess.spacing_mm;
    s.pml_thickness = cfg.sim.pml_thickness;
    s.margin_voxels = cfg.margin_voxels;
    s.sim_clip_hi_hu = cfg.preprocess.sim_clip_hi_hu;
    s.f0 = cfg.sim.f0;
    s.ray_step_mm = cfg.ray_step_mm;
    s.materials = cfg.materials;
    return s;
}

Scene build_scene(const PreparedCt& ct, const ArrayTransducer& posed, const Pose& pose, WorldPoint target,
                  const SceneSettings& s)
{
    const GridGeometry& g0 = ct.ct.grid();
    if (!isotropic(g0)) throw DataError("build_scene: CT spacing must be isotropic");
    const double sp = g0.spacing[0];

    Box box = array_box(posed, sp);
    box.add(g0.origin);
    box.add(g0.world(g0.dims[0] - 1, g0.dims[1] - 1, g0.dims[2] - 1));
    box.add(target);
    const GridGeometry g = padded_lattice(box, g0.origin, sp, s.margin_voxels + s.pml_thickness);

    // Integer offset of the new lattice inside the CT lattice.
    std::array<int, 3> off{};
    for (int a = 0; a < 3; ++a) off[a] = static_cast<int>(std::lround((g.origin[a] - g0.origin[a]) / sp));

    Scene sc;
    sc.ct = Volume(g, kAirHu);
    Volume skull(g);
    sc.bone_mask = Volume(g);
    const auto hu_hi = static_cast<float>(s.sim_clip_hi_hu);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                const int ci = i + off[0], cj = j + off[1], ck = k + off[2];
                if (!g0.contains(ci, cj, ck)) continue;
                const std::size_t src = g0.index(ci, cj, ck);
                const std::size_t dst = g.index(i, j, k);
                sc.ct[dst] = std::min(ct.ct[src], hu_hi);
                skull[dst] = ct.skull_mask[src];
                sc.bone_mask[dst] = ct.bone_mask[src];
            }

    sc.medium = build_medium(sc.ct, skull, s.f0, s.materials);
    sc.array = posed;
    sc.pose = pose;
    sc.target = target;
    sc.materials = s.materials;
    sc.sources = rasterize_bowls(posed, g);
    for (std::size_t e = 0; e < sc.sources.element_count(); ++e)
        for (std::size_t v : sc.sources.element_voxels[e])
            if (skull[v] != 0.0f) throw DataError("build_scene: element " + std::to_string(e) + " overlaps the skull");

    const Vec3 ti = g.to_index(target);
    const int i = static_cast<int>(std::lround(ti.x)), j = static_cast<int>(std::lround(ti.y)),
              k = static_cast<int>(std::lround(ti.z));
    if (!g.contains(i, j, k) || sc.medium.brain_mask.at(i, j, k) == 0.0f)
        throw DataError("build_scene: target is not inside the intracranial cavity");

    sc.rays = trace_elements(posed, ct.bone_mask, ct.ct, target, s.ray_step_mm);
    return sc;
}

Scene build_free_field_scene(const ArrayTransducer& posed, const Pose& pose, WorldPoint target,
                             const SceneSettings& s)
{
    const double sp = s.spacing_mm;
    Box box = array_box(posed, sp);
    box.add(target);
    const GridGeometry g = padded_lattice(box, target, sp, s.margin_voxels + s.pml_thickness);

    Scene sc;
    sc.free_field = true;
    sc.ct = Volume(g, 0.0f);
    sc.bone_mask = Volume(g);
    sc.medium = water_medium(g, s.f0, s.materials);
    const double r = 0.5 * posed.roc;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                sc.medium.brain_mask.at(i, j, k) = distance(g.world(i, j, k), posed.focus) <= r ? 1.0f : 0.0f;
    sc.array = posed;
    sc.pose = pose;
    sc.target = target;
    sc.materials = s.materials;
    sc.sources = rasterize_bowls(posed, g);
    return sc;
}

CorrectionResult compute_correction(const Scene& scene, CorrectionMode mode, const SimParams& sim)
{
    const std::size_t n = scene.array.count();
    CorrectionResult c;
    c.mode = mode;
    c.phases.assign(n, 0.0);
    c.flagged.assign(n, false);
    switch (mode) {
    case CorrectionMode::none:
        break;
    case CorrectionMode::kranion: {
        c.delays.assign(n, 0.0);
        if (scene.free_field || scene.rays.empty()) break;
        std::vector<double> thickness(n, 0.0);
        std::vector<bool> active(n, false);
        for (std::size_t k = 0; k < n; ++k) {
            const auto& rec = scene.rays[k];
            if (rec.intersects) thickness[k] = rec.thickness;
            active[k] = rec.active;
            c.flagged[k] = !rec.active;
        }
        c.c_skull_mean = mean_skull_speed(scene.medium);
        c.delays = kranion_delays(thickness, scene.array.roc, scene.materials.c_water, c.c_skull_mean, active);
        c.phases = delays_to_phases(c.delays, sim.f0);
        break;
    }
    case CorrectionMode::time_reversal: {
        const ElementRecordings rec = record_point_source(scene.medium, scene.target, scene.sources, sim);
        c.phases = time_reversal_phases(rec);
        break;
    }
    }
    return c;
}

SourceDrive make_drive(const Scene& scene, const CorrectionResult& corr, const ModeSettings& ms)
{
    SourceDrive d = SourceDrive::uniform(scene.array.count(), 1.0);
    d.phase = corr.phases;
    if (ms.disable_inactive && !scene.rays.empty())
        for (std::size_t k = 0; k < scene.rays.size(); ++k)
            if (!scene.rays[k].active) d.amplitude[k] = 0.0;
    return d;
}

ModeResult run_mode(const Scene& scene, CorrectionMode mode, const ModeSettings& ms)
{
    ModeResult r;
    r.mode = mode;
    r.correction = compute_correction(scene, mode, ms.sim);
    r.drive = make_drive(scene, r.correction, ms);
    r.field = simulate(scene.medium, scene.sources, r.drive, ms.sim);
    r.focal = focal_metrics(r.field.rms, scene.target, scene.medium.brain_mask, ms.focal_threshold);
    return r;
}

std::vector<CorrectionMode> modes_from_config(const std::string& correction)
{
    if (correction == "all") return {CorrectionMode::none, CorrectionMode::kranion, CorrectionMode::time_reversal};
    return {parse_correction_mode(correction)};
}

} // namespace tfus
