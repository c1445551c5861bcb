#include <cmath>
#include <limits>
#include <set>

#include "ettwin/core/error.hpp"
#include "ettwin/harness/harness.hpp"

namespace ettwin::harness {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& pointer, const std::string& message) {
    throw Error(ErrorKind::Config, "config error at '" + pointer + "': " + message, pointer);
}

// Reads members of one JSON object, remembering which keys were consumed so
// that unknown keys can be reported by pointer.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string pointer) : j_(j), pointer_(std::move(pointer)) {
        if (!j_.is_object()) fail(pointer_.empty() ? "/" : pointer_, "expected an object");
    }

    std::string at(const std::string& key) const { return pointer_ + "/" + key; }
    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }
    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number()) fail(at(key), "expected a number");
        return v.get<double>();
    }
    int integer(const std::string& key, int fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) fail(at(key), "expected an integer");
        return v.get<int>();
    }
    std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            fail(at(key), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) fail(at(key), "expected a boolean");
        return v.get<bool>();
    }
    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_string()) fail(at(key), "expected a string");
        return v.get<std::string>();
    }
    Vec3 vec3(const std::string& key, const Vec3& fallback) {
        if (!has(key)) return fallback;
        return read_vec3(j_.at(key), at(key));
    }

    static Vec3 read_vec3(const json& v, const std::string& pointer) {
        if (!v.is_array() || v.size() != 3) fail(pointer, "expected an array of 3 numbers");
        Vec3 out;
        for (int i = 0; i < 3; ++i) {
            if (!v[static_cast<std::size_t>(i)].is_number()) fail(pointer + "/" + std::to_string(i), "expected a number");
            out[i] = v[static_cast<std::size_t>(i)].get<double>();
        }
        return out;
    }

    void finish(const std::set<std::string>& ignored = {}) const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.contains(key) && !ignored.contains(key)) fail(at(key), "unknown key");
    }

private:
    const json& j_;
    std::string pointer_;
    std::set<std::string> seen_;
};

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

double axis_value_from_json(const json& v, const std::string& pointer) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinity"))
        return std::numeric_limits<double>::infinity();
    fail(pointer, "expected a number or \"inf\"");
}

json axis_value_json(double v) { return std::isinf(v) ? json("inf") : json(v); }

template <class Fn>
auto rethrow_as_config(const std::string& pointer, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        fail(pointer.empty() ? "/" : pointer, e.what());
    }
}

}  // namespace

json to_json(const eyescene::EyeModel& e) {
    return {{"eyeball_center", vec3_json(e.eyeball_center)},
            {"eyeball_radius", e.eyeball_radius},
            {"cornea_radius", e.cornea_radius},
            {"cornea_center_offset", e.cornea_center_offset},
            {"pupil_radius", e.pupil_radius},
            {"iris_radius", e.iris_radius},
            {"albedo_pupil", e.albedo_pupil},
            {"albedo_iris", e.albedo_iris},
            {"albedo_sclera", e.albedo_sclera},
            {"albedo_skin", e.albedo_skin},
            {"eyelid_aperture", e.eyelid_aperture},
            {"texture_seed", e.texture_seed},
            {"handedness", e.handedness}};
}

eyescene::EyeModel eye_model_from_json(const json& j, const std::string& pointer) {
    ObjectReader r(j, pointer);
    eyescene::EyeModel e;
    e.eyeball_center = r.vec3("eyeball_center", e.eyeball_center);
    e.eyeball_radius = r.number("eyeball_radius", e.eyeball_radius);
    e.cornea_radius = r.number("cornea_radius", e.cornea_radius);
    e.cornea_center_offset = r.number("cornea_center_offset", e.cornea_center_offset);
    e.pupil_radius = r.number("pupil_radius", e.pupil_radius);
    e.iris_radius = r.number("iris_radius", e.iris_radius);
    e.albedo_pupil = r.number("albedo_pupil", e.albedo_pupil);
    e.albedo_iris = r.number("albedo_iris", e.albedo_iris);
    e.albedo_sclera = r.number("albedo_sclera", e.albedo_sclera);
    e.albedo_skin = r.number("albedo_skin", e.albedo_skin);
    e.eyelid_aperture = r.number("eyelid_aperture", e.eyelid_aperture);
    e.texture_seed = r.seed("texture_seed", e.texture_seed);
    e.handedness = r.integer("handedness", e.handedness);
    r.finish();
    rethrow_as_config(pointer, [&] {
        e.validate();
        return 0;
    });
    return e;
}

json to_json(const eyescene::RigConfig& rig) {
    json cams = json::array();
    for (const auto& c : rig.cameras) {
        json rot = json::array();
        for (int r = 0; r < 3; ++r)
            rot.push_back({c.pose.rotation(r, 0), c.pose.rotation(r, 1), c.pose.rotation(r, 2)});
        cams.push_back({{"id", c.id},
                        {"fx", c.intrinsics.fx},
                        {"fy", c.intrinsics.fy},
                        {"cx", c.intrinsics.cx},
                        {"cy", c.intrinsics.cy},
                        {"width", c.intrinsics.width},
                        {"height", c.intrinsics.height},
                        {"position", vec3_json(c.pose.translation)},
                        {"rotation", std::move(rot)}});
    }
    json leds = json::array();
    for (const auto& l : rig.leds)
        leds.push_back({{"position", vec3_json(l.position)},
                        {"radiant_intensity", l.radiant_intensity},
                        {"wavelength_nm", l.wavelength_nm}});
    return {{"nominal_eye_center", vec3_json(rig.nominal_eye_center)}, {"cameras", cams}, {"leds", leds}};
}

eyescene::RigConfig rig_from_json(const json& j, const std::string& pointer) {
    if (j.is_string() && j.get<std::string>() == "default") return eyescene::default_rig();
    ObjectReader r(j, pointer);
    eyescene::RigConfig rig;
    rig.nominal_eye_center = r.vec3("nominal_eye_center", eyescene::kNominalEyeCenter);
    if (!r.has("cameras")) fail(r.at("cameras"), "missing required key");
    const json& cams = r.raw("cameras");
    if (!cams.is_array()) fail(r.at("cameras"), "expected an array");
    for (std::size_t i = 0; i < cams.size(); ++i) {
        const std::string p = r.at("cameras") + "/" + std::to_string(i);
        ObjectReader c(cams[i], p);
        eyescene::RigCamera cam;
        cam.id = c.integer("id", static_cast<int>(i));
        cam.intrinsics.fx = c.number("fx", cam.intrinsics.fx);
        cam.intrinsics.fy = c.number("fy", cam.intrinsics.fy);
        cam.intrinsics.cx = c.number("cx", cam.intrinsics.cx);
        cam.intrinsics.cy = c.number("cy", cam.intrinsics.cy);
        cam.intrinsics.width = c.integer("width", cam.intrinsics.width);
        cam.intrinsics.height = c.integer("height", cam.intrinsics.height);
        if (!c.has("position")) fail(c.at("position"), "missing required key");
        const Vec3 position = c.vec3("position", Vec3::Zero());
        if (c.has("rotation")) {
            const json& rot = c.raw("rotation");
            if (!rot.is_array() || rot.size() != 3) fail(c.at("rotation"), "expected a 3x3 array");
            cam.pose.translation = position;
            for (int row = 0; row < 3; ++row)
                cam.pose.rotation.row(row) =
                    ObjectReader::read_vec3(rot[static_cast<std::size_t>(row)], c.at("rotation") + "/" + std::to_string(row));
        } else {
            cam.pose = look_at(position, c.vec3("look_at", rig.nominal_eye_center));
        }
        c.finish();
        rethrow_as_config(p, [&] {
            cam.intrinsics.validate();
            cam.pose.validate();
            return 0;
        });
        rig.cameras.push_back(cam);
    }
    if (!r.has("leds")) fail(r.at("leds"), "missing required key");
    const json& leds = r.raw("leds");
    if (!leds.is_array()) fail(r.at("leds"), "expected an array");
    for (std::size_t i = 0; i < leds.size(); ++i) {
        const std::string p = r.at("leds") + "/" + std::to_string(i);
        ObjectReader l(leds[i], p);
        eyescene::Illuminant led;
        if (!l.has("position")) fail(l.at("position"), "missing required key");
        led.position = l.vec3("position", Vec3::Zero());
        led.radiant_intensity = l.number("radiant_intensity", 0.0);
        led.wavelength_nm = l.number("wavelength_nm", 850.0);
        l.finish();
        rig.leds.push_back(led);
    }
    r.finish();
    rethrow_as_config(pointer, [&] {
        rig.validate();
        return 0;
    });
    return rig;
}

json to_json(const optics::OpticsConfig& c) {
    return {{"brightness", c.brightness},
            {"blur_radius", c.blur_radius},
            {"read_sigma", c.read_sigma},
            {"shot_gain", c.shot_gain},
            {"target_psnr", c.target_psnr ? json(*c.target_psnr) : json(nullptr)},
            {"quant_bits", c.quant_bits}};
}

optics::OpticsConfig optics_from_json(const json& j, const std::string& pointer) {
    ObjectReader r(j, pointer);
    optics::OpticsConfig c;
    c.brightness = r.number("brightness", c.brightness);
    c.blur_radius = r.number("blur_radius", c.blur_radius);
    c.read_sigma = r.number("read_sigma", c.read_sigma);
    c.shot_gain = r.number("shot_gain", c.shot_gain);
    if (r.has("target_psnr") && !r.raw("target_psnr").is_null()) c.target_psnr = r.number("target_psnr", 0.0);
    c.quant_bits = r.integer("quant_bits", c.quant_bits);
    r.finish();
    rethrow_as_config(pointer, [&] {
        c.validate();
        return 0;
    });
    return c;
}

json to_json(const DatasetSpec& s) {
    return {{"identity_count", s.identity_count},
            {"identity_seed_base", s.identity_seed_base},
            {"target_count", s.target_count},
            {"half_fov_deg", s.half_fov_deg},
            {"slippage_per_gaze", s.slippage_per_gaze},
            {"slippage_range_mm", vec3_json(s.slippage_range)},
            {"master_seed", s.master_seed},
            {"camera_id", s.camera_id},
            {"rig", to_json(s.rig)},
            {"optics", to_json(s.optics)}};
}

DatasetSpec dataset_from_json(const json& j, const std::string& pointer) {
    ObjectReader r(j, pointer);
    DatasetSpec s;
    s.identity_count = r.integer("identity_count", s.identity_count);
    s.identity_seed_base = r.seed("identity_seed_base", s.identity_seed_base);
    s.target_count = r.integer("target_count", s.target_count);
    s.half_fov_deg = r.number("half_fov_deg", s.half_fov_deg);
    s.slippage_per_gaze = r.integer("slippage_per_gaze", s.slippage_per_gaze);
    s.slippage_range = r.vec3("slippage_range_mm", s.slippage_range);
    s.master_seed = r.seed("master_seed", s.master_seed);
    s.camera_id = r.integer("camera_id", s.camera_id);
    if (r.has("rig")) s.rig = rig_from_json(r.raw("rig"), r.at("rig"));
    if (r.has("optics")) s.optics = optics_from_json(r.raw("optics"), r.at("optics"));
    r.finish();
    rethrow_as_config(pointer, [&] {
        s.validate();
        return 0;
    });
    return s;
}

json to_json(const SweepSpec& s) {
    json values = json::array();
    for (double v : s.axis_values) values.push_back(axis_value_json(v));
    json estimators = json::array();
    for (auto e : s.estimators) estimators.push_back(to_string(e));
    return {{"axis", to_string(s.axis)},
            {"values", values},
            {"trials", s.trials},
            {"train_fraction", s.train_fraction},
            {"estimators", estimators},
            {"ridge_lambda", s.ridge_lambda},
            {"feature_grid", {s.grid.height, s.grid.width}},
            {"dark_threshold", s.dark_threshold},
            {"line_steps", s.line_steps}};
}

SweepSpec sweep_from_json(const json& j, const std::string& pointer) {
    ObjectReader r(j, pointer);
    SweepSpec s;
    if (!r.has("axis")) fail(r.at("axis"), "missing required key");
    const std::string axis = r.string("axis", "");
    try {
        s.axis = axis_from_string(axis);
    } catch (const Error&) {
        fail(r.at("axis"), "unknown sweep axis '" + axis + "'");
    }
    s.line_steps = r.integer("line_steps", s.line_steps);
    if (r.has("values")) {
        const json& values = r.raw("values");
        if (!values.is_array()) fail(r.at("values"), "expected an array");
        for (std::size_t i = 0; i < values.size(); ++i)
            s.axis_values.push_back(axis_value_from_json(values[i], r.at("values") + "/" + std::to_string(i)));
    } else {
        s.axis_values = default_axis_values(s.axis, s.line_steps);
    }
    s.trials = r.integer("trials", s.trials);
    s.train_fraction = r.number("train_fraction", s.train_fraction);
    if (r.has("estimators")) {
        const json& est = r.raw("estimators");
        if (!est.is_array()) fail(r.at("estimators"), "expected an array");
        s.estimators.clear();
        for (std::size_t i = 0; i < est.size(); ++i) {
            const std::string p = r.at("estimators") + "/" + std::to_string(i);
            if (!est[i].is_string()) fail(p, "expected a string");
            try {
                s.estimators.push_back(estimator_from_string(est[i].get<std::string>()));
            } catch (const Error&) {
                fail(p, "unknown estimator '" + est[i].get<std::string>() + "'");
            }
        }
    }
    s.ridge_lambda = r.number("ridge_lambda", s.ridge_lambda);
    if (r.has("feature_grid")) {
        const json& g = r.raw("feature_grid");
        if (!g.is_array() || g.size() != 2 || !g[0].is_number_integer() || !g[1].is_number_integer())
            fail(r.at("feature_grid"), "expected [height, width]");
        s.grid = {g[0].get<int>(), g[1].get<int>()};
    }
    s.dark_threshold = r.number("dark_threshold", s.dark_threshold);
    r.finish();
    return s;
}

RunConfig run_config_from_json(const json& j) {
    ObjectReader r(j, "");
    if (!r.has("spec_version")) fail("/spec_version", "missing required key");
    if (r.integer("spec_version", 0) != kSpecVersion)
        fail("/spec_version", "unsupported spec_version (expected " + std::to_string(kSpecVersion) + ")");
    RunConfig c;
    if (r.has("dataset")) c.dataset = dataset_from_json(r.raw("dataset"), "/dataset");
    if (r.has("sweep")) {
        c.sweep = sweep_from_json(r.raw("sweep"), "/sweep");
        c.sweep->base = c.dataset;
        rethrow_as_config("/sweep", [&] {
            c.sweep->validate();
            return 0;
        });
    }
    // Provenance blocks written by earlier runs are informational only.
    r.finish({"provenance"});
    return c;
}

json to_json(const RunConfig& c) {
    json j{{"spec_version", kSpecVersion}, {"dataset", to_json(c.dataset)}};
    if (c.sweep) j["sweep"] = to_json(*c.sweep);
    return j;
}

}  // namespace ettwin::harness
