#include "tfus/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tfus/correction.hpp"
#include "tfus/error.hpp"

namespace tfus {

namespace {

using nlohmann::json;

// Reads fields of one JSON object and rejects keys nobody asked for.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) fail("", "expected an object");
    }

    bool has(const std::string& key)
    {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& raw(const std::string& key) { return j_.at(key); }

    void number(const std::string& key, double& out)
    {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_number()) fail(key, "expected a number");
        out = v.get<double>();
        if (!std::isfinite(out)) fail(key, "must be finite");
    }

    void integer(const std::string& key, int& out)
    {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        out = v.get<int>();
    }

    void seed(const std::string& key, std::uint64_t& out)
    {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
            fail(key, "expected a non-negative integer");
        out = v.get<std::uint64_t>();
    }

    void boolean(const std::string& key, bool& out)
    {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) fail(key, "expected true or false");
        out = v.get<bool>();
    }

    void string(const std::string& key, std::string& out)
    {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_string()) fail(key, "expected a string");
        out = v.get<std::string>();
    }

    void vec3(const std::string& key, Vec3& out)
    {
        if (!has(key)) return;
        out = to_vec3(j_.at(key), key);
    }

    Vec3 to_vec3(const json& v, const std::string& key) const
    {
        if (!v.is_array() || v.size() != 3) fail(key, "expected an array of three numbers");
        Vec3 r;
        for (int a = 0; a < 3; ++a) {
            if (!v[a].is_number()) fail(key, "expected an array of three numbers");
            r[a] = v[a].get<double>();
        }
        if (!r.finite()) fail(key, "must be finite");
        return r;
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail(it.key(), "unknown key");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const
    {
        const std::string where = key.empty() ? (path_.empty() ? "<root>" : path_) : child(key);
        throw ConfigError("config: " + where + ": " + what);
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base)
{
    if (p.is_absolute() || base.empty()) return p;
    return base / p;
}

void read_materials(ObjectReader& r, MaterialConstants& m)
{
    r.number("c_water", m.c_water);
    r.number("c_brain", m.c_brain);
    r.number("c_bone", m.c_bone);
    r.number("rho_water", m.rho_water);
    r.number("rho_brain", m.rho_brain);
    r.number("rho_bone", m.rho_bone);
    r.number("alpha_water", m.alpha_water);
    r.number("alpha_brain", m.alpha_brain);
    r.number("alpha_bone_min", m.alpha_bone_min);
    r.number("alpha_bone_max", m.alpha_bone_max);
    r.finish();
}

void read_sim(ObjectReader& r, RunConfig& cfg)
{
    auto& s = cfg.sim;
    r.number("f0_hz", s.f0);
    r.integer("n_cycles", s.n_cycles);
    r.number("cfl", s.cfl);
    r.number("ppw_min", s.ppw_min);
    r.integer("pml_thickness", s.pml_thickness);
    r.number("pml_alpha", s.pml_alpha);
    r.integer("rms_window_cycles", s.rms_window_cycles);
    r.number("amplitude_pa", s.amplitude);
    r.integer("margin_voxels", cfg.margin_voxels);
    r.finish();
}

PhantomConfig read_phantom(ObjectReader& r, std::uint64_t default_seed)
{
    PhantomConfig pc;
    auto& s = pc.spec;
    s.seed = default_seed;
    if (r.has("grid")) {
        ObjectReader g(r.raw("grid"), r.child("grid"));
        if (g.has("dims")) {
            const auto& d = g.raw("dims");
            if (!d.is_array() || d.size() != 3) g.fail("dims", "expected three integers");
            for (int a = 0; a < 3; ++a) {
                if (!d[a].is_number_integer()) g.fail("dims", "expected three integers");
                s.grid.dims[a] = d[a].get<int>();
            }
        }
        if (g.has("spacing_mm")) {
            const auto& v = g.raw("spacing_mm");
            if (v.is_number()) {
                s.grid.spacing = {v.get<double>(), v.get<double>(), v.get<double>()};
            } else {
                const Vec3 sp = g.to_vec3(v, "spacing_mm");
                s.grid.spacing = {sp.x, sp.y, sp.z};
            }
        }
        g.vec3("origin_mm", s.grid.origin);
        g.finish();
    }
    if (r.has("center_mm")) {
        Vec3 c;
        r.vec3("center_mm", c);
        s.center = c;
    }
    r.number("outer_radius_mm", s.outer_radius);
    r.number("base_thickness_mm", s.base_thickness);
    r.number("cortical_hu", s.cortical_hu);
    r.number("trabecular_hu", s.trabecular_hu);
    r.number("trabecular_fraction", s.trabecular_fraction);
    r.number("noise_sigma_hu", s.noise_sigma);
    r.seed("seed", s.seed);
    if (r.has("modulation")) {
        const auto& arr = r.raw("modulation");
        if (!arr.is_array()) r.fail("modulation", "expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            ObjectReader l(arr[i], r.child("modulation[" + std::to_string(i) + "]"));
            ThicknessLobe lobe;
            l.vec3("direction", lobe.direction);
            l.number("amplitude_mm", lobe.amplitude);
            l.number("width_deg", lobe.width_deg);
            l.finish();
            s.modulation.push_back(lobe);
        }
    }
    if (r.has("perturb")) {
        ObjectReader p(r.raw("perturb"), r.child("perturb"));
        PerturbConfig pert;
        pert.seed = s.seed + 1;
        p.number("thickness_scale", pert.thickness_scale);
        p.number("noise_sigma_hu", pert.noise_sigma_hu);
        p.seed("seed", pert.seed);
        p.finish();
        pc.perturb = pert;
    }
    r.finish();
    return pc;
}

} // namespace

void RunConfig::validate() const
{
    if (config_version != kConfigVersion)
        throw ConfigError("config: unsupported config_version " + std::to_string(config_version));
    materials.validate();
    sim.validate();
    if (array.n < 1) throw ConfigError("config: array.n must be >= 1");
    if (!(array.roc_mm > 0.0)) throw ConfigError("config: array.roc_mm must be positive");
    if (!(array.element_diameter_mm > 0.0)) throw ConfigError("config: array.element_diameter_mm must be positive");
    if (!(pose_search.limit_deg >= 0.0)) throw ConfigError("config: pose_search.limit_deg must be >= 0");
    if (!(pose_search.step_deg > 0.0)) throw ConfigError("config: pose_search.step_deg must be positive");
    if (!(preprocess.spacing_mm > 0.0)) throw ConfigError("config: preprocess.spacing_mm must be positive");
    if (preprocess.dilation_radius < 0) throw ConfigError("config: preprocess.dilation_radius must be >= 0");
    if (!(preprocess.clip_lo_hu < preprocess.clip_hi_hu)) throw ConfigError("config: clip_lo_hu must be below clip_hi_hu");
    if (!(preprocess.clip_lo_hu < preprocess.sim_clip_hi_hu))
        throw ConfigError("config: clip_lo_hu must be below sim_clip_hi_hu");
    if (!(ray_step_mm > 0.0)) throw ConfigError("config: ray_step_mm must be positive");
    if (margin_voxels < 0) throw ConfigError("config: sim.margin_voxels must be >= 0");
    if (correction != "all") parse_correction_mode(correction);
    if (!(focal_threshold > 0.0 && focal_threshold < 1.0))
        throw ConfigError("config: focal_threshold must lie in (0, 1)");
    if (output_dir.empty()) throw ConfigError("config: output_dir must not be empty");
    if (pose && !(std::isfinite(pose->tilt_x) && std::isfinite(pose->tilt_y) && std::isfinite(pose->roll)))
        throw ConfigError("config: pose angles must be finite");
    if (phantom && phantom->perturb && !(phantom->perturb->thickness_scale > 0.0))
        throw ConfigError("config: phantom.perturb.thickness_scale must be positive");
}

RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    RunConfig cfg;
    ObjectReader r(j, "");
    if (!r.has("config_version")) throw ConfigError("config: missing config_version");
    r.integer("config_version", cfg.config_version);
    std::string path;
    if (r.has("ct")) {
        r.string("ct", path);
        cfg.ct = resolve(path, base_dir);
    }
    if (r.has("ct_b")) {
        r.string("ct_b", path);
        cfg.ct_b = resolve(path, base_dir);
    }
    if (r.has("target")) {
        Vec3 t;
        r.vec3("target", t);
        cfg.target = t;
    }
    if (r.has("materials")) {
        ObjectReader m(r.raw("materials"), "materials");
        read_materials(m, cfg.materials);
    }
    if (r.has("array")) {
        ObjectReader a(r.raw("array"), "array");
        a.integer("n", cfg.array.n);
        a.number("roc_mm", cfg.array.roc_mm);
        a.number("element_diameter_mm", cfg.array.element_diameter_mm);
        a.finish();
    }
    if (r.has("pose")) {
        ObjectReader p(r.raw("pose"), "pose");
        Pose pose;
        p.number("tilt_x_deg", pose.tilt_x);
        p.number("tilt_y_deg", pose.tilt_y);
        p.number("roll_deg", pose.roll);
        p.finish();
        cfg.pose = pose;
    }
    if (r.has("pose_search")) {
        ObjectReader p(r.raw("pose_search"), "pose_search");
        p.number("limit_deg", cfg.pose_search.limit_deg);
        p.number("step_deg", cfg.pose_search.step_deg);
        p.number("roll_deg", cfg.pose_search.roll_deg);
        p.finish();
    }
    if (r.has("preprocess")) {
        ObjectReader p(r.raw("preprocess"), "preprocess");
        auto& pp = cfg.preprocess;
        p.number("threshold_hu", pp.threshold_hu);
        p.integer("dilation_radius", pp.dilation_radius);
        p.number("clip_lo_hu", pp.clip_lo_hu);
        p.number("clip_hi_hu", pp.clip_hi_hu);
        p.number("sim_clip_hi_hu", pp.sim_clip_hi_hu);
        p.number("spacing_mm", pp.spacing_mm);
        p.finish();
    }
    r.number("ray_step_mm", cfg.ray_step_mm);
    if (r.has("sim")) {
        ObjectReader s(r.raw("sim"), "sim");
        read_sim(s, cfg);
    }
    r.string("correction", cfg.correction);
    r.boolean("disable_inactive", cfg.disable_inactive);
    r.number("focal_threshold", cfg.focal_threshold);
    if (r.has("output_dir")) {
        r.string("output_dir", path);
        cfg.output_dir = path;
    }
    r.seed("seed", cfg.seed);
    if (r.has("compare")) {
        ObjectReader c(r.raw("compare"), "compare");
        CompareConfig cc;
        if (!c.has("run_a") || !c.has("run_b")) c.fail("", "run_a and run_b are required");
        c.string("run_a", path);
        cc.run_a = resolve(path, base_dir);
        c.string("run_b", path);
        cc.run_b = resolve(path, base_dir);
        if (c.has("study_csv")) {
            c.string("study_csv", path);
            cc.study_csv = path;
        }
        c.string("label", cc.label);
        c.finish();
        cfg.compare = cc;
    }
    if (r.has("phantom")) {
        ObjectReader p(r.raw("phantom"), "phantom");
        cfg.phantom = read_phantom(p, cfg.seed);
    }
    r.finish();
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

std::filesystem::path resolve_output_dir(const RunConfig& cfg)
{
    const char* root = std::getenv("TFUS_OUTPUT_ROOT");
    if (root && *root && cfg.output_dir.is_relative()) return std::filesystem::path(root) / cfg.output_dir;
    return cfg.output_dir;
}

} // namespace tfus
