#include "tfus/commands.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tfus/error.hpp"
#include "tfus/pipeline.hpp"

namespace tfus {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

json vec_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

Vec3 json_vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json grid_json(const GridGeometry& g)
{
    return {{"dims", g.dims}, {"spacing_mm", g.spacing}, {"origin_mm", vec_json(g.origin)}};
}

json pose_json(const Pose& p)
{
    return {{"tilt_x_deg", p.tilt_x}, {"tilt_y_deg", p.tilt_y}, {"roll_deg", p.roll}, {"focus_mm", vec_json(p.focus)}};
}

json focal_json(const FocalReport& r)
{
    return {{"peak_pressure_pa", r.peak_pressure},
            {"peak_location_mm", vec_json(r.peak_location)},
            {"target_pressure_pa", r.target_pressure},
            {"focal_shift_mm", r.focal_shift},
            {"focal_volume_mm3", r.focal_volume},
            {"focal_dims_mm", r.focal_dims},
            {"threshold", r.threshold}};
}

FocalReport focal_from_json(const json& j)
{
    FocalReport r;
    r.peak_pressure = j.at("peak_pressure_pa").get<double>();
    r.peak_location = json_vec(j.at("peak_location_mm"));
    r.target_pressure = j.at("target_pressure_pa").get<double>();
    r.focal_shift = j.at("focal_shift_mm").get<double>();
    r.focal_volume = j.at("focal_volume_mm3").get<double>();
    r.focal_dims = j.at("focal_dims_mm").get<std::array<double, 3>>();
    r.threshold = j.at("threshold").get<double>();
    return r;
}

json sim_json(const PressureField& f, const CommandOptions& opt)
{
    const auto& p = f.params;
    json j = {{"f0_hz", p.f0},
              {"n_cycles", p.n_cycles},
              {"cfl", p.cfl},
              {"ppw_min", p.ppw_min},
              {"pml_thickness", p.pml_thickness},
              {"pml_alpha", p.pml_alpha},
              {"rms_window_cycles", p.rms_window_cycles},
              {"amplitude_pa", p.amplitude},
              {"dt_s", f.dt},
              {"steps", f.steps},
              {"rms_steps", f.rms_steps},
              {"ppw", f.ppw},
              {"c_ref", f.c_ref},
              {"warnings", f.warnings}};
    if (!opt.stable_output) j["runtime_s"] = f.runtime_s;
    return j;
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write failed: " + path.string());
}

json read_json(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

fs::path prepare_output(const RunConfig& cfg)
{
    const fs::path dir = resolve_output_dir(cfg);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

Volume load_ct(const fs::path& path)
{
    if (!fs::exists(path)) throw DataError("input CT not found: " + path.string());
    return read_nifti(path);
}

WorldPoint require_target(const RunConfig& cfg)
{
    if (!cfg.target) throw ConfigError("config: target is required for this command");
    return *cfg.target;
}

std::string elements_csv(const std::vector<ElementRecord>& recs, const ArrayTransducer& arr)
{
    std::ostringstream s;
    s << "element_id,x_mm,y_mm,z_mm,intersects,thickness_mm,incidence_deg,sdr,active\n";
    for (const auto& r : recs) {
        const auto& c = arr.elements[static_cast<std::size_t>(r.element_id)].center;
        s << r.element_id << ',' << num(c.x) << ',' << num(c.y) << ',' << num(c.z) << ',' << (r.intersects ? 1 : 0)
          << ',' << num(r.thickness) << ',' << num(r.incidence_deg) << ',' << (r.sdr ? num(*r.sdr) : "") << ','
          << (r.active ? 1 : 0) << '\n';
    }
    return s.str();
}

std::string corrections_csv(const CorrectionResult& c)
{
    std::ostringstream s;
    s << "element_id,delay_s,phase_rad,mode\n";
    for (std::size_t k = 0; k < c.phases.size(); ++k) {
        const double delay = c.delays.empty() ? 0.0 : c.delays[k];
        s << k << ',' << num(delay) << ',' << num(c.phases[k]) << ',' << to_string(c.mode) << '\n';
    }
    return s.str();
}

json metrics_json(const PlanResult& p, double ray_step)
{
    return {{"pose", pose_json(p.pose)},
            {"n_elements", p.array.count()},
            {"nae", p.metrics.nae},
            {"sdr_mean", p.metrics.sdr_mean},
            {"st_mean_mm", p.metrics.st_mean},
            {"ray_step_mm", ray_step},
            {"active_incidence_deg", kActiveIncidenceDeg}};
}

const std::vector<std::string> kStudyColumns = {
    "label",          "run_a",           "run_b",           "mode",          "ref_peak_pa",    "other_peak_pa",
    "ref_target_pa",  "other_target_pa", "ref_volume_mm3",  "other_volume_mm3", "ref_shift_mm", "other_shift_mm",
    "peak_diff_pct",  "target_diff_pct", "focal_volume_diff_pct", "dx_mm",   "dy_mm",          "dz_mm",
    "distance_mm",    "mae_hu"};

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string sanitize(std::string s)
{
    for (char& ch : s)
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ' ';
    return s;
}

json stat_pair(const std::vector<double>& ref, const std::vector<double>& other)
{
    json j;
    try {
        j["pearson_r"] = pearson(ref, other);
    } catch (const DataError& e) {
        j["pearson_r"] = nullptr;
        j["pearson_note"] = e.what();
    }
    try {
        const auto w = wilcoxon_signed_rank(ref, other);
        j["wilcoxon_w_plus"] = w.w_plus;
        j["wilcoxon_p"] = w.p;
        j["wilcoxon_n"] = w.n;
        j["wilcoxon_exact"] = w.exact;
    } catch (const DataError& e) {
        j["wilcoxon_p"] = nullptr;
        j["wilcoxon_note"] = e.what();
    }
    return j;
}

} // namespace

FocalReport read_focal_report(const fs::path& report_json) { return focal_from_json(read_json(report_json).at("focal")); }

void cmd_preprocess(const RunConfig& cfg, const CommandOptions&)
{
    if (!cfg.ct) throw ConfigError("config: ct is required for preprocess");
    const fs::path dir = prepare_output(cfg);
    json prov;
    const auto run_one = [&](const fs::path& in, const std::string& suffix) {
        const Volume raw = load_ct(in);
        const PreparedCt p = prepare_ct(raw, cfg.preprocess);
        write_nifti(p.ct, dir / ("ct_preprocessed" + suffix + ".nii"));
        write_nifti(p.skull_mask, dir / ("skull_mask" + suffix + ".nii"));
        write_nifti(p.bone_mask, dir / ("bone_mask" + suffix + ".nii"));
        prov["inputs"].push_back({{"path", in.string()},
                                  {"input_grid", grid_json(raw.grid())},
                                  {"output_grid", grid_json(p.ct.grid())},
                                  {"bone_voxels", count_nonzero(p.bone_mask)},
                                  {"skull_voxels", count_nonzero(p.skull_mask)},
                                  {"suffix", suffix}});
    };
    run_one(*cfg.ct, "");
    if (cfg.ct_b) run_one(*cfg.ct_b, "_b");
    const auto& pp = cfg.preprocess;
    prov["threshold_hu"] = pp.threshold_hu;
    prov["dilation_radius"] = pp.dilation_radius;
    prov["clip_hu"] = {pp.clip_lo_hu, pp.clip_hi_hu};
    prov["spacing_mm"] = pp.spacing_mm;
    prov["interpolation"] = "trilinear";
    prov["connectivity"] = 26;
    write_json(dir / "preprocess.json", prov);
}

void cmd_plan(const RunConfig& cfg, const CommandOptions&)
{
    if (!cfg.ct) throw ConfigError("config: ct is required for plan");
    const WorldPoint target = require_target(cfg);
    const fs::path dir = prepare_output(cfg);
    const PreparedCt a = prepare_ct(load_ct(*cfg.ct), cfg.preprocess);
    const PlanResult pa = plan_sonication(cfg, a, target);
    json ja = metrics_json(pa, cfg.ray_step_mm);
    ja["pose_source"] = cfg.pose ? "fixed" : "search";
    write_json(dir / "plan.json", ja);
    write_text(dir / "elements.csv", elements_csv(pa.metrics.per_element, pa.array));
    if (cfg.ct_b) {
        // The second CT is evaluated at the first CT's pose so elements line up.
        RunConfig cb = cfg;
        cb.pose = pa.pose;
        const PreparedCt b = prepare_ct(load_ct(*cfg.ct_b), cfg.preprocess);
        const PlanResult pb = plan_sonication(cb, b, target);
        json jb = metrics_json(pb, cfg.ray_step_mm);
        jb["pose_source"] = "from_ct";
        write_json(dir / "plan_b.json", jb);
        write_text(dir / "elements_b.csv", elements_csv(pb.metrics.per_element, pb.array));
        write_json(dir / "plan_overlap.json",
                   {{"element_overlap", element_overlap(pa.metrics, pb.metrics)},
                    {"nae_a", pa.metrics.nae},
                    {"nae_b", pb.metrics.nae}});
    }
}

void cmd_simulate(const RunConfig& cfg, const CommandOptions& opt)
{
    const WorldPoint target = require_target(cfg);
    const auto modes = modes_from_config(cfg.correction);
    const fs::path dir = prepare_output(cfg);
    const SceneSettings ss = scene_settings(cfg);
    const ArrayTransducer templ = make_array(cfg.array);

    Scene scene;
    json summary;
    if (cfg.ct) {
        const PreparedCt ct = prepare_ct(load_ct(*cfg.ct), cfg.preprocess);
        const Pose pose = choose_pose(cfg, templ, ct, target);
        scene = build_scene(ct, pose_array(templ, pose), pose, target, ss);
        summary["ct"] = cfg.ct->string();
    } else {
        Pose pose = cfg.pose.value_or(Pose{});
        pose.focus = target;
        scene = build_free_field_scene(pose_array(templ, pose), pose, target, ss);
        summary["ct"] = nullptr;
    }
    summary["free_field"] = scene.free_field;
    summary["grid"] = grid_json(scene.medium.grid());
    summary["pose"] = pose_json(scene.pose);
    summary["target_mm"] = vec_json(target);
    summary["n_elements"] = scene.array.count();
    summary["source_voxels"] = count_nonzero(scene.sources.mask);
    summary["nae"] = count_active(scene.rays);
    summary["medium_diagnostics"] = scene.medium.diagnostics;
    summary["c_ref"] = scene.medium.c_ref;

    if (!scene.free_field) {
        write_text(dir / "elements.csv", elements_csv(scene.rays, scene.array));
        write_nifti(scene.ct, dir / "ct_sim.nii");
        write_nifti(scene.bone_mask, dir / "bone_mask_sim.nii");
    }

    const ModeSettings ms{cfg.sim, cfg.disable_inactive, cfg.focal_threshold};
    for (CorrectionMode mode : modes) {
        const ModeResult r = run_mode(scene, mode, ms);
        const std::string name = to_string(mode);
        write_nifti(r.field.rms, dir / ("field_" + name + ".nii"));
        write_text(dir / ("corrections_" + name + ".csv"), corrections_csv(r.correction));
        json rep = {{"mode", name},
                    {"focal", focal_json(r.focal)},
                    {"sim", sim_json(r.field, opt)},
                    {"target_mm", vec_json(target)},
                    {"grid", grid_json(r.field.rms.grid())},
                    {"disable_inactive", cfg.disable_inactive}};
        if (mode == CorrectionMode::kranion) rep["c_skull_mean"] = r.correction.c_skull_mean;
        write_json(dir / ("report_" + name + ".json"), rep);
        summary["modes"].push_back(name);
    }
    write_json(dir / "simulate.json", summary);
}

void cmd_compare(const RunConfig& cfg, const CommandOptions&)
{
    if (!cfg.compare) throw ConfigError("config: compare section is required for compare");
    const auto& cc = *cfg.compare;
    const fs::path dir = prepare_output(cfg);
    for (const auto& run : {cc.run_a, cc.run_b})
        if (!fs::is_directory(run)) throw DataError("run directory not found: " + run.string());

    std::optional<double> mae;
    const fs::path ct_a = cc.run_a / "ct_sim.nii", ct_b = cc.run_b / "ct_sim.nii";
    if (fs::exists(ct_a) && fs::exists(ct_b)) {
        const Volume a = read_nifti(ct_a), b = read_nifti(ct_b);
        const Volume mask = read_nifti(cc.run_a / "bone_mask_sim.nii");
        if (same_grid(a.grid(), b.grid()) && count_nonzero(mask) > 0) mae = mae_in_mask(a, b, mask);
    }

    json out = {{"run_a", cc.run_a.string()}, {"run_b", cc.run_b.string()}, {"label", cc.label}};
    out["mae_hu"] = mae ? json(*mae) : json(nullptr);
    std::vector<std::vector<std::string>> rows;
    for (CorrectionMode mode : {CorrectionMode::none, CorrectionMode::kranion, CorrectionMode::time_reversal}) {
        const std::string name = to_string(mode);
        const fs::path ra = cc.run_a / ("report_" + name + ".json"), rb = cc.run_b / ("report_" + name + ".json");
        if (!fs::exists(ra) || !fs::exists(rb)) continue;
        const FocalReport a = read_focal_report(ra), b = read_focal_report(rb);
        const ComparisonReport c = compare_fields(a, b);
        out["modes"][name] = {{"peak_diff_pct", c.peak_diff_pct},
                              {"target_diff_pct", c.target_diff_pct},
                              {"peak_distance_vector_mm", vec_json(c.peak_distance_vector)},
                              {"peak_distance_mm", c.peak_distance},
                              {"focal_volume_diff_pct", c.focal_volume_diff_pct}};
        rows.push_back({sanitize(cc.label), sanitize(cc.run_a.string()), sanitize(cc.run_b.string()), name,
                        num(a.peak_pressure), num(b.peak_pressure), num(a.target_pressure), num(b.target_pressure),
                        num(a.focal_volume), num(b.focal_volume), num(a.focal_shift), num(b.focal_shift),
                        num(c.peak_diff_pct), num(c.target_diff_pct), num(c.focal_volume_diff_pct),
                        num(c.peak_distance_vector.x), num(c.peak_distance_vector.y),
                        num(c.peak_distance_vector.z), num(c.peak_distance), mae ? num(*mae) : ""});
    }
    if (rows.empty()) throw DataError("compare: the runs share no report_<mode>.json");
    write_json(dir / "comparison.json", out);

    if (!cc.study_csv) return;
    const fs::path csv = cc.study_csv->is_absolute() ? *cc.study_csv : dir / *cc.study_csv;
    const bool fresh = !fs::exists(csv);
    {
        std::ofstream f(csv, std::ios::binary | std::ios::app);
        if (!f) throw DataError("cannot write " + csv.string());
        if (fresh) {
            for (std::size_t i = 0; i < kStudyColumns.size(); ++i) f << (i ? "," : "") << kStudyColumns[i];
            f << '\n';
        }
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << row[i];
            f << '\n';
        }
    }

    // Study-level statistics over every accumulated row of each mode.
    std::ifstream in(csv, std::ios::binary);
    std::string line;
    std::getline(in, line);
    const auto header = split_csv_line(line);
    if (header != kStudyColumns) throw DataError("study CSV has an unexpected header: " + csv.string());
    std::map<std::string, std::vector<std::vector<std::string>>> by_mode;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != kStudyColumns.size()) throw DataError("malformed study CSV row in " + csv.string());
        by_mode[f[3]].push_back(std::move(f));
    }
    const auto column = [](const std::vector<std::vector<std::string>>& rs, std::size_t col) {
        std::vector<double> v;
        for (const auto& r : rs) v.push_back(std::stod(r[col]));
        return v;
    };
    json stats;
    for (const auto& [mode, rs] : by_mode) {
        json m = {{"n", rs.size()}};
        if (rs.size() >= 5) {
            m["peak_pressure"] = stat_pair(column(rs, 4), column(rs, 5));
            m["target_pressure"] = stat_pair(column(rs, 6), column(rs, 7));
            m["focal_volume"] = stat_pair(column(rs, 8), column(rs, 9));
            m["focal_shift"] = stat_pair(column(rs, 10), column(rs, 11));
        }
        stats[mode] = m;
    }
    write_json(dir / "study_stats.json", stats);
}

void cmd_phantom(const RunConfig& cfg, const CommandOptions&)
{
    if (!cfg.phantom) throw ConfigError("config: phantom section is required for phantom");
    const fs::path dir = prepare_output(cfg);
    const auto& pc = *cfg.phantom;
    const Volume ct = make_skull_phantom(pc.spec);
    write_nifti(ct, dir / "phantom.nii");
    json j = {{"grid", grid_json(pc.spec.grid)},
              {"center_mm", vec_json(pc.spec.centre())},
              {"outer_radius_mm", pc.spec.outer_radius},
              {"base_thickness_mm", pc.spec.base_thickness},
              {"cortical_hu", pc.spec.cortical_hu},
              {"trabecular_hu", pc.spec.trabecular_hu},
              {"trabecular_fraction", pc.spec.trabecular_fraction},
              {"noise_sigma_hu", pc.spec.noise_sigma},
              {"seed", pc.spec.seed}};
    for (const auto& lobe : pc.spec.modulation)
        j["modulation"].push_back(
            {{"direction", vec_json(lobe.direction)}, {"amplitude_mm", lobe.amplitude}, {"width_deg", lobe.width_deg}});
    if (pc.perturb) {
        const auto& p = *pc.perturb;
        write_nifti(perturb_phantom(pc.spec, ct, p.thickness_scale, p.noise_sigma_hu, p.seed), dir / "phantom_b.nii");
        j["perturb"] = {{"thickness_scale", p.thickness_scale}, {"noise_sigma_hu", p.noise_sigma_hu}, {"seed", p.seed}};
    }
    write_json(dir / "phantom.json", j);
}

void run_command(const std::string& name, const RunConfig& cfg, const CommandOptions& opt)
{
    if (name == "preprocess") return cmd_preprocess(cfg, opt);
    if (name == "plan") return cmd_plan(cfg, opt);
    if (name == "simulate") return cmd_simulate(cfg, opt);
    if (name == "compare") return cmd_compare(cfg, opt);
    if (name == "phantom") return cmd_phantom(cfg, opt);
    throw ConfigError("unknown command '" + name + "'");
}

int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const DataError*>(&e)) return 3;
    if (dynamic_cast<const NumericalError*>(&e)) return 4;
    return 1;
}

} // namespace tfus
