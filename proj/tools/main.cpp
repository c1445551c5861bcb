#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ettwin/core/error.hpp"
#include "ettwin/eyescene/eyescene.hpp"
#include "ettwin/harness/harness.hpp"
#include "ettwin/optics/optics.hpp"
#include "json.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ettwin;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitSelftest = 4;

struct Options {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    bool force = false;

    std::optional<int> identity;
    std::optional<std::uint64_t> identity_seed;
    std::optional<int> target;
    std::optional<int> camera;
    std::optional<int> slippage_index;

    std::optional<int> identities;
    bool etlf = false;

    std::vector<std::string> inputs;
};

void write_text(const fs::path& path, const std::string& text) {
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

json load_json(const std::string& path) {
    if (path.empty()) return json{{"spec_version", harness::kSpecVersion}};
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Config, "malformed JSON in " + path + " at byte " + std::to_string(e.byte) + ": " + e.what(),
                    "");
    }
}

harness::RunConfig resolve_config(const json& doc, const Options& opt) {
    auto cfg = harness::run_config_from_json(doc);
    if (opt.seed) {
        cfg.dataset.master_seed = *opt.seed;
        if (cfg.sweep) cfg.sweep->base.master_seed = *opt.seed;
    }
    return cfg;
}

void prepare_out_dir(const fs::path& dir, const fs::path& primary, bool force) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
    if (fs::exists(primary) && !force)
        throw Error(ErrorKind::Io, "refusing to overwrite " + primary.string() + " (use --force)");
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// run.json is itself a valid config: the provenance block is ignored on load.
void write_provenance(const fs::path& dir, const std::string& command, const harness::RunConfig& cfg,
                      const Options& opt, json extra = json::object()) {
    json doc = harness::to_json(cfg);
    json prov{{"command", command},
              {"artifact_version", harness::kArtifactVersion},
              {"config_path", opt.config_path},
              {"workers", opt.workers},
              {"seeds",
               {{"master_seed", cfg.dataset.master_seed}, {"identity_seed_base", cfg.dataset.identity_seed_base}}},
              {"created_utc", utc_now()}};
    for (auto& [k, v] : extra.items()) prov[k] = v;
    doc["provenance"] = std::move(prov);
    write_text(dir / "run.json", doc.dump(2) + "\n");
}

int cmd_render(const Options& opt) {
    json doc = load_json(opt.config_path);
    // A provenance record from an earlier render supplies any frame selector not given on the command line.
    json previous = doc.contains("provenance") && doc["provenance"].is_object() ? doc["provenance"].value("render", json())
                                                                                 : json();
    auto pick = [&](const std::optional<int>& flag, const char* key, int fallback) {
        if (flag) return *flag;
        if (previous.is_object() && previous.contains(key)) return previous[key].get<int>();
        return fallback;
    };
    const auto cfg = resolve_config(doc, opt);
    const auto& spec = cfg.dataset;
    const int identity = pick(opt.identity, "identity", 0);
    const int target = pick(opt.target, "target_index", 0);
    const int camera = pick(opt.camera, "camera_id", spec.camera_id);
    const int slip = pick(opt.slippage_index, "slippage_index", 0);
    std::uint64_t id_seed = harness::identity_seed(spec, identity);
    if (opt.identity_seed)
        id_seed = *opt.identity_seed;
    else if (!opt.identity && previous.is_object() && previous.contains("identity_seed"))
        id_seed = previous["identity_seed"].get<std::uint64_t>();

    if (target < 0 || target >= spec.target_count)
        throw Error(ErrorKind::Validation,
                    "invalid target_index " + std::to_string(target) + ": valid range is [0," +
                        std::to_string(spec.target_count) + ")",
                    "");
    if (slip < 0 || slip >= spec.slippage_per_gaze)
        throw Error(ErrorKind::Validation,
                    "invalid slippage_index " + std::to_string(slip) + ": valid range is [0," +
                        std::to_string(spec.slippage_per_gaze) + ")");
    const auto& cam = spec.rig.camera(camera);

    const fs::path out(opt.out_dir);
    prepare_out_dir(out, out / "frame.pgm", opt.force);

    const int ids[] = {identity};
    auto frames = harness::plan_frames(spec, ids);
    auto frame = frames.at(static_cast<std::size_t>(target) * spec.slippage_per_gaze + slip);
    frame.camera_id = camera;
    const auto eye = eyescene::apply_gaze(eyescene::generate_identity(id_seed), frame.label.gaze);
    const LinearImage clean = eyescene::render(eye, cam.intrinsics, cam.pose, spec.rig.leds, frame.slippage);
    const auto output = optics::apply_pipeline(clean, spec.optics, frame.noise_seed);

    write_etlf(out / "frame.etlf", clean);
    write_pgm(out / "frame.pgm", output);
    json sidecar = harness::frame_sidecar(frame);
    sidecar["identity_seed"] = id_seed;
    sidecar["slippage_index"] = slip;
    sidecar["noise_seed"] = frame.noise_seed;
    sidecar["pupil_center_px"] = [&] {
        CameraPose moved = cam.pose;
        moved.translation += frame.slippage.offset();
        const Vec2 p = project(eye.pupil_center(), cam.intrinsics, moved);
        return json::array({p.x(), p.y()});
    }();
    write_text(out / "frame.json", sidecar.dump(2) + "\n");
    write_provenance(out, "render", cfg, opt,
                     {{"render",
                       {{"identity", identity},
                        {"identity_seed", id_seed},
                        {"target_index", target},
                        {"camera_id", camera},
                        {"slippage_index", slip}}}});
    std::cout << "wrote " << (out / "frame.pgm").string() << "\n";
    return 0;
}

int cmd_dataset(const Options& opt) {
    json doc = load_json(opt.config_path);
    auto cfg = resolve_config(doc, opt);
    if (opt.identities) {
        cfg.dataset.identity_count = *opt.identities;
        try {
            cfg.dataset.validate();
        } catch (const Error& e) {
            throw Error(ErrorKind::Config, e.what(), "/dataset/identity_count");
        }
    }
    const fs::path out(opt.out_dir);
    prepare_out_dir(out, out / "manifest.json", opt.force);
    std::vector<int> ids(static_cast<std::size_t>(cfg.dataset.identity_count));
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    harness::BuildOptions build;
    build.workers = opt.workers;
    build.overwrite = opt.force;
    build.write_etlf = opt.etlf;
    const auto manifest = harness::build_dataset(cfg.dataset, ids, out, build);
    write_provenance(out, "dataset", cfg, opt);
    std::cout << "wrote " << manifest.frames.size() << " frames to " << out.string() << "\n";
    return 0;
}

void write_report_files(const fs::path& out, std::span<const harness::SweepReport> reports, const std::string& csv) {
    write_text(out / "report.csv", csv);
    for (int p : {50, 75, 95}) write_text(out / ("p" + std::to_string(p) + ".svg"), harness::render_svg(reports, p));
}

int cmd_sweep(const Options& opt) {
    json doc = load_json(opt.config_path);
    const auto cfg = resolve_config(doc, opt);
    if (!cfg.sweep) throw Error(ErrorKind::Config, "config has no sweep section", "/sweep");
    const fs::path out(opt.out_dir);
    prepare_out_dir(out, out / "report.csv", opt.force);
    harness::RunOptions run;
    run.workers = opt.workers;
    run.log = [](const std::string& msg) { std::cerr << msg << "\n"; };
    const auto report = harness::run_sweep(*cfg.sweep, run);
    const harness::SweepReport reports[] = {report};
    write_report_files(out, reports, report.to_csv());
    write_text(out / "summary.json", report.summary_json().dump(2) + "\n");
    write_provenance(out, "sweep", cfg, opt);
    std::cout << "wrote " << report.cells.size() << " cells to " << (out / "report.csv").string() << "\n";
    return 0;
}

harness::SweepReport load_report(const fs::path& dir) {
    const fs::path summary_path = dir / "summary.json";
    json j;
    try {
        j = json::parse(read_text(summary_path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Config, "malformed JSON in " + summary_path.string() + ": " + e.what());
    }
    harness::SweepReport r;
    r.spec = harness::sweep_from_json(j.at("sweep"), "/sweep");
    r.artifact_version = j.value("artifact_version", harness::kArtifactVersion);
    for (const auto& row : j.at("rows")) {
        harness::SweepSummaryRow s;
        const auto& v = row.at("axis_value");
        s.axis_value = v.is_string() ? std::numeric_limits<double>::infinity() : v.get<double>();
        s.estimator = harness::estimator_from_string(row.at("estimator").get<std::string>());
        s.mean_p50 = row.at("mean_p50");
        s.std_p50 = row.at("std_p50");
        s.mean_p75 = row.at("mean_p75");
        s.std_p75 = row.at("std_p75");
        s.mean_p95 = row.at("mean_p95");
        s.std_p95 = row.at("std_p95");
        r.summary.push_back(s);
    }
    return r;
}

int cmd_report(const Options& opt) {
    if (opt.inputs.empty()) throw Error(ErrorKind::Config, "report needs at least one sweep output directory");
    const fs::path out(opt.out_dir);
    prepare_out_dir(out, out / "report.csv", opt.force);
    std::vector<harness::SweepReport> reports;
    std::string merged;
    for (const auto& in : opt.inputs) {
        reports.push_back(load_report(in));
        std::istringstream csv(read_text(fs::path(in) / "report.csv"));
        std::string line;
        bool header = true;
        while (std::getline(csv, line)) {
            if (header) {
                if (merged.empty()) merged = line + "\n";
                header = false;
                continue;
            }
            if (!line.empty()) merged += line + "\n";
        }
    }
    write_report_files(out, reports, merged);
    harness::RunConfig cfg;
    write_provenance(out, "report", cfg, opt, {{"inputs", opt.inputs}});
    std::cout << "merged " << reports.size() << " report(s) into " << (out / "report.csv").string() << "\n";
    return 0;
}

int error_exit(ErrorKind kind, const std::string& message, const std::string& pointer, int code) {
    json err{{"error", {{"kind", to_string(kind)}, {"message", message}, {"pointer", pointer}}}};
    std::cerr << err.dump() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Eye-tracking digital twin: render, dataset, sweep, report, selftest"};
    app.require_subcommand(1);
    Options opt;

    auto common = [&](CLI::App* sub, bool needs_out) {
        sub->add_option("--config", opt.config_path, "JSON config or run.json provenance record")->check(CLI::ExistingFile);
        auto* out = sub->add_option("--out", opt.out_dir, "output directory");
        if (needs_out) out->required();
        sub->add_option("--seed", opt.seed, "override dataset master_seed");
        sub->add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--force", opt.force, "overwrite existing outputs");
    };

    auto* render = app.add_subcommand("render", "render one frame (clean ETLF, PGM, sidecar JSON)");
    common(render, true);
    render->add_option("--identity", opt.identity, "identity id");
    render->add_option("--identity-seed", opt.identity_seed, "explicit identity seed");
    render->add_option("--target", opt.target, "gaze target index");
    render->add_option("--camera", opt.camera, "camera id");
    render->add_option("--slippage-index", opt.slippage_index, "slippage sample index");

    auto* dataset = app.add_subcommand("dataset", "build a dataset of PGM frames with labels");
    common(dataset, true);
    dataset->add_option("--identities", opt.identities, "override identity_count");
    dataset->add_flag("--etlf", opt.etlf, "also write clean linear renders");

    auto* sweep = app.add_subcommand("sweep", "run a hardware sweep and write the report");
    common(sweep, true);

    auto* report = app.add_subcommand("report", "merge sweep outputs into one CSV and SVG plots");
    report->add_option("--out", opt.out_dir, "output directory")->required();
    report->add_flag("--force", opt.force, "overwrite existing outputs");
    report->add_option("inputs", opt.inputs, "sweep output directories")->required()->check(CLI::ExistingDirectory);

    auto* selftest = app.add_subcommand("selftest", "kernel, quantization, PSNR and glint checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return error_exit(ErrorKind::Config, e.what(), "", kExitConfig);
    }

    try {
        if (*render) return cmd_render(opt);
        if (*dataset) return cmd_dataset(opt);
        if (*sweep) return cmd_sweep(opt);
        if (*report) return cmd_report(opt);
        if (*selftest) return cli::run_selftest(std::cout) == 0 ? 0 : kExitSelftest;
    } catch (const Error& e) {
        const bool config = e.kind() == ErrorKind::Config || e.kind() == ErrorKind::Validation;
        return error_exit(e.kind(), e.what(), e.pointer(), config ? kExitConfig : kExitRuntime);
    } catch (const std::exception& e) {
        return error_exit(ErrorKind::Io, e.what(), "", kExitRuntime);
    }
    return 0;
}
