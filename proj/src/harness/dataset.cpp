#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "ettwin/core/error.hpp"
#include "ettwin/core/seed.hpp"
#include "ettwin/harness/harness.hpp"

namespace ettwin::harness {

void DatasetSpec::validate() const {
    if (identity_count < 5) throw Error(ErrorKind::Validation, "identity_count must be >= 5");
    if (slippage_per_gaze < 1) throw Error(ErrorKind::Validation, "slippage_per_gaze must be >= 1");
    if (target_count < 1) throw Error(ErrorKind::Validation, "target_count must be >= 1");
    if (!(half_fov_deg > 0.0 && half_fov_deg < 90.0)) throw Error(ErrorKind::Validation, "half_fov_deg must be in (0, 90)");
    if (!(slippage_range.minCoeff() > 0.0)) throw Error(ErrorKind::Validation, "slippage ranges must be positive");
    rig.validate();
    rig.camera(camera_id);
    optics.validate();
}

std::uint64_t identity_seed(const DatasetSpec& spec, int identity_id) {
    return derive_seed(spec.identity_seed_base, {static_cast<std::uint64_t>(identity_id)});
}

std::uint64_t trial_seed(const DatasetSpec& spec, int trial) {
    return derive_seed(spec.master_seed, {3, static_cast<std::uint64_t>(trial)});
}

eyescene::EyeModel identity_model(const DatasetSpec& spec, int identity_id) {
    return eyescene::generate_identity(identity_seed(spec, identity_id));
}

std::vector<FrameRecord> plan_frames(const DatasetSpec& spec, std::span<const int> identity_ids) {
    const auto targets = eyescene::gaze_targets(spec.target_count, spec.half_fov_deg);
    std::vector<FrameRecord> frames;
    frames.reserve(spec.frame_count(identity_ids.size()));
    for (int id : identity_ids) {
        for (int t = 0; t < spec.target_count; ++t) {
            for (int s = 0; s < spec.slippage_per_gaze; ++s) {
                const auto path = {static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(t),
                                   static_cast<std::uint64_t>(s)};
                FrameRecord f;
                f.label = GazeSample{targets[static_cast<std::size_t>(t)], t, id};
                f.slippage_index = s;
                f.slippage_seed = derive_seed(derive_seed(spec.master_seed, {1}), path);
                f.noise_seed = derive_seed(derive_seed(spec.master_seed, {2}), path);
                f.slippage = eyescene::sample_slippage(f.slippage_seed, spec.slippage_range);
                f.camera_id = spec.camera_id;
                frames.push_back(f);
            }
        }
    }
    return frames;
}

LinearImage render_frame(const DatasetSpec& spec, const FrameRecord& frame) {
    const auto eye = eyescene::apply_gaze(identity_model(spec, frame.label.identity_id), frame.label.gaze);
    const auto& cam = spec.rig.camera(frame.camera_id);
    return eyescene::render(eye, cam.intrinsics, cam.pose, spec.rig.leds, frame.slippage);
}

QuantizedImage synthesize_frame(const DatasetSpec& spec, const FrameRecord& frame) {
    return optics::apply_pipeline(render_frame(spec, frame), spec.optics, frame.noise_seed);
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    const int threads = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n && !failed; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed = true;
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

std::string frame_stem(const FrameRecord& frame) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "id%04d_t%03d_s%02d", frame.label.identity_id, frame.label.target_index,
                  frame.slippage_index);
    return buf;
}

nlohmann::json frame_sidecar(const FrameRecord& frame) {
    const Vec3& g = frame.label.gaze;
    return {{"identity_id", frame.label.identity_id},
            {"target_index", frame.label.target_index},
            {"gaze", {g.x(), g.y(), g.z()}},
            {"slippage", {frame.slippage.dx, frame.slippage.dy, frame.slippage.dz}},
            {"camera_id", frame.camera_id}};
}

nlohmann::json Manifest::to_json() const {
    nlohmann::json j;
    j["spec_version"] = kSpecVersion;
    j["artifact_version"] = kArtifactVersion;
    j["dataset"] = harness::to_json(spec);
    j["identity_ids"] = identity_ids;
    j["total_frames"] = frames.size();
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        auto entry = frame_sidecar(frames[i]);
        entry["file"] = files[i];
        entry["slippage_index"] = frames[i].slippage_index;
        entry["slippage_seed"] = frames[i].slippage_seed;
        entry["noise_seed"] = frames[i].noise_seed;
        list.push_back(std::move(entry));
    }
    j["frames"] = std::move(list);
    return j;
}

Manifest build_dataset(const DatasetSpec& spec, std::span<const int> identity_ids, const std::filesystem::path& out_dir,
                       const BuildOptions& options) {
    spec.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create dataset directory " + out_dir.string() + ": " + ec.message());
    const fs::path manifest_path = out_dir / "manifest.json";
    if (fs::exists(manifest_path) && !options.overwrite)
        throw Error(ErrorKind::Io, "refusing to overwrite existing manifest " + manifest_path.string());

    Manifest m;
    m.spec = spec;
    m.identity_ids.assign(identity_ids.begin(), identity_ids.end());
    m.frames = plan_frames(spec, identity_ids);
    m.files.resize(m.frames.size());
    parallel_for(m.frames.size(), options.workers, [&](std::size_t i) {
        const auto& frame = m.frames[i];
        const std::string stem = frame_stem(frame);
        const LinearImage clean = render_frame(spec, frame);
        if (options.write_etlf) write_etlf(out_dir / (stem + ".etlf"), clean);
        write_pgm(out_dir / (stem + ".pgm"), optics::apply_pipeline(clean, spec.optics, frame.noise_seed));
        const std::string sidecar = frame_sidecar(frame).dump(2) + "\n";
        write_file_bytes(out_dir / (stem + ".json"),
                         std::span(reinterpret_cast<const std::uint8_t*>(sidecar.data()), sidecar.size()));
        m.files[i] = stem + ".pgm";
    });
    const std::string text = m.to_json().dump(1) + "\n";
    write_file_bytes(manifest_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    return m;
}

IdentitySplit split_identities(std::span<const int> ids, std::uint64_t trial_seed, double train_fraction) {
    if (ids.size() < 5) throw Error(ErrorKind::Validation, "identity split needs at least 5 identities");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error(ErrorKind::Validation, "train_fraction must be in (0, 1)");
    std::vector<int> order(ids.begin(), ids.end());
    // Fisher-Yates driven by SplitMix64 so the split is identical on every platform.
    SplitMix64 rng(derive_seed(trial_seed, {0x5b1170ULL}));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.next() % (i + 1));
        std::swap(order[i], order[j]);
    }
    // Round before ceil so 0.8 * 155 lands on 124, not 125.
    const double raw = train_fraction * static_cast<double>(order.size());
    const auto n_train = static_cast<std::size_t>(std::ceil(std::round(raw * 1e9) / 1e9));
    IdentitySplit s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    if (s.test.empty()) throw Error(ErrorKind::Validation, "identity split leaves no test identities");
    return s;
}

}  // namespace ettwin::harness
