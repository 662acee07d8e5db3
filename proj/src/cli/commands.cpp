#include "seedseg/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <numeric>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "seedseg/error.hpp"
#include "seedseg/growcut.hpp"
#include "seedseg/metrics.hpp"
#include "seedseg/morphology.hpp"
#include "seedseg/nrrd.hpp"
#include "seedseg/phantom.hpp"
#include "seedseg/server.hpp"
#include "seedseg/strokes.hpp"
#include "seedseg/study_csv.hpp"
#include "seedseg/volumetry.hpp"

namespace seedseg::cli {

namespace {

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

io::Encoding encoding_from(const std::string& name) {
    if (name == "gzip")
        return io::Encoding::gzip;
    if (name == "raw")
        return io::Encoding::raw;
    throw ValidationError("encoding must be 'gzip' or 'raw', got '" + name + "'");
}

LabelVolume read_mask(const std::string& path, int label) {
    const auto labels = io::read_nrrd(path).to_labels();
    return select_label(labels, static_cast<Label>(label));
}

struct PhantomArgs {
    std::string out, truth, strokes, shape = "cube", encoding = "gzip";
    std::vector<int> dims{32, 32, 32};
    std::vector<int> center;
    std::vector<double> spacing{1.0, 1.0, 1.0};
    double size = 6.0, noise = 0.0;
    float fg = 100.0f, bg = 0.0f;
    std::uint64_t seed = 0;
};

int cmd_phantom(const PhantomArgs& a, std::ostream& out) {
    io::PhantomSpec spec;
    spec.dims = {a.dims[0], a.dims[1], a.dims[2]};
    spec.center = a.center.empty() ? Index3{spec.dims.nx / 2, spec.dims.ny / 2, spec.dims.nz / 2}
                                   : Index3{a.center[0], a.center[1], a.center[2]};
    if (a.shape == "cube")
        spec.shape = io::PhantomShape::cube;
    else if (a.shape == "ball")
        spec.shape = io::PhantomShape::ball;
    else
        throw ValidationError("shape must be 'cube' or 'ball', got '" + a.shape + "'");
    spec.size = a.size;
    spec.fg_intensity = a.fg;
    spec.bg_intensity = a.bg;
    spec.noise_sigma = a.noise;
    spec.rng_seed = a.seed;
    spec.spacing = {a.spacing[0], a.spacing[1], a.spacing[2]};
    const auto enc = encoding_from(a.encoding);

    const auto p = io::generate_phantom(spec);
    io::write_nrrd(p.image, a.out, enc);
    out << "image: " << a.out << "\n";
    if (!a.truth.empty()) {
        io::write_nrrd(p.truth, a.truth, enc);
        out << "truth: " << a.truth << " (" << count_label(p.truth, 1) << " voxels)\n";
    }
    if (!a.strokes.empty()) {
        io::write_strokes({spec.dims, io::phantom_strokes(spec)}, a.strokes);
        out << "strokes: " << a.strokes << "\n";
    }
    return k_exit_ok;
}

struct SegmentArgs {
    std::string volume, strokes, out, workers = "auto", encoding = "gzip";
    int margin = 5, connectivity = 26;
    std::optional<int> max_iters;
    bool naive = false, no_precompute = false, quiet = false;
};

int parse_workers(const std::string& s) {
    if (s == "auto")
        return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    int n = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec != std::errc{} || ptr != s.data() + s.size() || n < 1)
        throw ValidationError("--workers must be 'auto' or a positive integer, got '" + s + "'");
    return n;
}

int cmd_segment(const SegmentArgs& a, std::ostream& out) {
    growcut::Config config;
    config.neighborhood = connectivity_from_int(a.connectivity);
    config.roi_margin = a.margin;
    config.max_iterations = a.max_iters;
    config.workers = parse_workers(a.workers);
    config.precompute_similarity = !a.no_precompute;
    config.validate();
    const auto enc = encoding_from(a.encoding);

    const auto image = io::read_nrrd(a.volume);
    const auto strokes = io::read_strokes(a.strokes);
    if (strokes.volume_dims && *strokes.volume_dims != image.volume.dims())
        throw ValidationError("strokes volume_dims do not match the volume dimensions");

    const auto result = a.naive ? growcut::run_naive(image.volume, strokes.strokes, config)
                                : growcut::run(image.volume, strokes.strokes, config);
    io::write_nrrd(result.labels, a.out, enc);

    const auto& s = result.stats;
    const std::size_t changed = std::accumulate(s.changed_per_iteration.begin(), s.changed_per_iteration.end(),
                                                std::size_t{0});
    out << "automaton: " << (a.naive ? "naive" : "optimized") << "\n";
    out << "roi: [" << s.roi.min.x << "," << s.roi.min.y << "," << s.roi.min.z << "] - [" << s.roi.max.x << ","
        << s.roi.max.y << "," << s.roi.max.z << "]\n";
    out << "iterations: " << s.iterations << "\n";
    out << "converged: " << (s.converged ? "yes" : "no") << "\n";
    out << "updates: " << changed << "\n";
    if (!a.quiet)
        out << "wall time: " << fmt("%.3f", s.wall_time_seconds) << " s\n";
    out << "output: " << a.out << "\n";
    return k_exit_ok;
}

struct PostprocessArgs {
    std::string mask, out, ops, encoding = "gzip";
    int label = 1, connectivity = 26;
};

int cmd_postprocess(const PostprocessArgs& a, std::ostream& out) {
    const auto ops = morphology::parse_pipeline(a.ops);
    const auto conn = connectivity_from_int(a.connectivity);
    const auto enc = encoding_from(a.encoding);
    const auto mask = read_mask(a.mask, a.label);
    const auto result = morphology::apply_pipeline(mask, ops, conn);
    io::write_nrrd(result, a.out, enc);
    out << "ops: " << (ops.empty() ? "(none)" : a.ops) << "\n";
    out << "voxels: " << count_label(mask, 1) << " -> " << count_label(result, 1) << "\n";
    out << "output: " << a.out << "\n";
    return k_exit_ok;
}

struct VolumeArgs {
    std::string mask, model = "voxel", axis = "axial";
    int label = 1;
    std::optional<double> d, a, b, c;
    bool diameters = false;
};

void print_volume(std::ostream& out, double mm3) {
    out << "volume_mm3: " << fmt("%.3f", mm3) << "\n";
    out << "volume_cm3: " << fmt("%.5f", mm3 / 1000.0) << "\n";
}

int cmd_volume(const VolumeArgs& a, std::ostream& out) {
    std::optional<LabelVolume> mask;
    std::optional<Vec3> spacing;
    const auto load = [&] {
        if (!mask) {
            if (a.mask.empty())
                throw ValidationError("--mask is required for model '" + a.model + "' without explicit diameters");
            const auto img = io::read_nrrd(a.mask);
            spacing = img.volume.spacing();
            mask = select_label(img.to_labels(), static_cast<Label>(a.label));
        }
    };
    out << "model: " << a.model << "\n";

    if (a.model == "voxel") {
        load();
        const auto v = volumetry::voxel_volume(*mask, *spacing);
        out << "voxels: " << v.voxel_count << "\n";
        print_volume(out, v.volume_mm3);
        return k_exit_ok;
    }
    if (a.model == "slice") {
        load();
        const Axis axis = axis_from_string(a.axis);
        const auto& sp = *spacing;
        // slice thickness is the spacing along the slicing axis
        const int k = axis == Axis::axial ? 2 : axis == Axis::sagittal ? 0 : 1;
        const double area = sp[0] * sp[1] * sp[2] / sp[k];
        out << "axis: " << to_string(axis) << "\n";
        print_volume(out, volumetry::slice_sum_volume(*mask, axis, sp[k], area));
        return k_exit_ok;
    }

    // Geometric models: explicit lengths, or measured from the mask.
    std::optional<volumetry::GeometricMeasurements> measured;
    const auto measure = [&]() -> const volumetry::GeometricMeasurements& {
        if (!measured) {
            load();
            measured = volumetry::measure(*mask, *spacing);
            out << "measured: d=" << fmt("%.3f", measured->d) << " d_perp=" << fmt("%.3f", measured->d_perp)
                << " a=" << fmt("%.3f", measured->a) << " b=" << fmt("%.3f", measured->b)
                << " c=" << fmt("%.3f", measured->c) << " (bounding-box approximation)\n";
        }
        return *measured;
    };
    if (a.model == "sphere") {
        const double d = a.d ? *a.d : measure().d;
        print_volume(out, volumetry::sphere_model(d));
    } else if (a.model == "ellipsoid") {
        const bool given = a.a && a.b && a.c;
        if (!given && (a.a || a.b || a.c))
            throw ValidationError("ellipsoid needs all of --a, --b and --c (or none to measure the mask)");
        if (given) {
            const auto mode = a.diameters ? volumetry::AxisMode::diameters : volumetry::AxisMode::semi_axes;
            print_volume(out, volumetry::ellipsoid_model(*a.a, *a.b, *a.c, mode));
        } else {
            const auto& m = measure();
            print_volume(out, volumetry::ellipsoid_model(m.a, m.b, m.c));
        }
    } else if (a.model == "caliper") {
        if (a.a.has_value() != a.b.has_value())
            throw ValidationError("caliper needs both --a and --b (or neither to measure the mask)");
        if (a.a) {
            print_volume(out, volumetry::caliper_model(*a.a, *a.b));
        } else {
            const auto& m = measure();
            print_volume(out, volumetry::caliper_model(m.d, m.d_perp));
        }
    } else {
        throw ValidationError("unknown volume model '" + a.model + "' (voxel, slice, sphere, ellipsoid, caliper)");
    }
    return k_exit_ok;
}

int cmd_dsc(const std::string& pa, const std::string& pb, int label, std::ostream& out) {
    const auto a = read_mask(pa, label);
    const auto b = read_mask(pb, label);
    out << fmt("%.4f", metrics::dsc(a, b)) << "\n";
    return k_exit_ok;
}

int cmd_report(const std::string& csv, const std::string& out_path, const std::string& summary_path,
               std::ostream& out) {
    const auto records = io::read_study_csv(csv);
    const auto report = metrics::study_report(records);
    out << metrics::render_text(report);
    if (!out_path.empty())
        io::write_study_csv(report.records, out_path);
    if (!summary_path.empty())
        io::write_file(summary_path, io::format_summary_csv(report));
    return k_exit_ok;
}

int cmd_serve(const std::string& host, int port, int idle_minutes, std::ostream& out) {
    if (port < 0 || port > 65535)
        throw ValidationError("--port must lie in 0..65535");
    if (idle_minutes < 1)
        throw ValidationError("--idle-timeout must be at least one minute");
    server::ServerOptions options;
    options.idle_timeout = std::chrono::minutes(idle_minutes);
    server::SegServer srv(options);
    int bound = port;
    if (port == 0) {
        bound = srv.bind_to_any_port(host);
        if (bound < 0)
            throw IoError("cannot bind " + host);
    }
    out << "listening on http://" << host << ":" << bound << std::endl;
    const bool ok = port == 0 ? srv.listen_after_bind() : srv.listen(host, port);
    if (!ok)
        throw IoError("cannot listen on " + host + ":" + std::to_string(port));
    return k_exit_ok;
}

} // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Seeded interactive 3D segmentation with a cellular automaton", "seedseg"};
    app.require_subcommand(1);

    std::function<int()> action;

    PhantomArgs ph;
    auto* phantom = app.add_subcommand("phantom", "Generate a synthetic test volume");
    phantom->add_option("--out", ph.out, "Image NRRD")->required();
    phantom->add_option("--truth", ph.truth, "Ground-truth label NRRD");
    phantom->add_option("--strokes", ph.strokes, "Seed strokes JSON");
    phantom->add_option("--shape", ph.shape, "cube or ball")->capture_default_str();
    phantom->add_option("--dims", ph.dims, "nx,ny,nz")->expected(3)->delimiter(',')->capture_default_str();
    phantom->add_option("--center", ph.center, "x,y,z (default: volume centre)")->expected(3)->delimiter(',');
    phantom->add_option("--size", ph.size, "Cube half edge or ball radius, voxels")->capture_default_str();
    phantom->add_option("--fg", ph.fg, "Object intensity")->capture_default_str();
    phantom->add_option("--bg", ph.bg, "Background intensity")->capture_default_str();
    phantom->add_option("--noise", ph.noise, "Gaussian noise sigma")->capture_default_str();
    phantom->add_option("--seed", ph.seed, "Noise RNG seed")->capture_default_str();
    phantom->add_option("--spacing", ph.spacing, "sx,sy,sz in mm")->expected(3)->delimiter(',');
    phantom->add_option("--encoding", ph.encoding, "gzip or raw")->capture_default_str();
    phantom->callback([&] { action = [&] { return cmd_phantom(ph, out); }; });

    SegmentArgs sg;
    int max_iters = 0;
    auto* segment = app.add_subcommand("segment", "Run the automaton on a volume with seed strokes");
    segment->add_option("--volume", sg.volume, "Input NRRD")->required();
    segment->add_option("--strokes", sg.strokes, "Seed strokes JSON")->required();
    segment->add_option("--out", sg.out, "Output label NRRD")->required();
    segment->add_option("--margin", sg.margin, "ROI margin in voxels")->capture_default_str();
    segment->add_option("--connectivity", sg.connectivity, "6 or 26")->capture_default_str();
    segment->add_option("--workers", sg.workers, "Worker threads or 'auto'")->capture_default_str();
    auto* iters_opt = segment->add_option("--max-iters", max_iters, "Iteration cap (default 2x ROI diagonal)");
    segment->add_flag("--naive", sg.naive, "Use the dense reference automaton");
    segment->add_flag("--no-precompute", sg.no_precompute, "Evaluate similarities on the fly");
    segment->add_flag("--quiet", sg.quiet, "Omit timing lines");
    segment->add_option("--encoding", sg.encoding, "gzip or raw")->capture_default_str();
    segment->callback([&] {
        if (iters_opt->count() > 0)
            sg.max_iters = max_iters;
        action = [&] { return cmd_segment(sg, out); };
    });

    PostprocessArgs pp;
    auto* postprocess = app.add_subcommand("postprocess", "Apply morphological post-editing to a mask");
    postprocess->add_option("--mask", pp.mask, "Input label NRRD")->required();
    postprocess->add_option("--out", pp.out, "Output mask NRRD")->required();
    postprocess->add_option("--ops", pp.ops, "e.g. dilate:1,erode:1,islands:keep_largest");
    postprocess->add_option("--label", pp.label, "Label treated as foreground")->capture_default_str();
    postprocess->add_option("--connectivity", pp.connectivity, "6 or 26")->capture_default_str();
    postprocess->add_option("--encoding", pp.encoding, "gzip or raw")->capture_default_str();
    postprocess->callback([&] { action = [&] { return cmd_postprocess(pp, out); }; });

    VolumeArgs va;
    double d = 0, ea = 0, eb = 0, ec = 0;
    auto* volume = app.add_subcommand("volume", "Measure a segmentation volume");
    volume->add_option("--mask", va.mask, "Label NRRD");
    volume->add_option("--model", va.model, "voxel, slice, sphere, ellipsoid or caliper")->capture_default_str();
    volume->add_option("--label", va.label, "Label treated as foreground")->capture_default_str();
    volume->add_option("--axis", va.axis, "Slice axis for the slice model")->capture_default_str();
    auto* d_opt = volume->add_option("--d", d, "Sphere diameter, mm");
    auto* a_opt = volume->add_option("--a", ea, "Ellipsoid a / caliper largest diameter, mm");
    auto* b_opt = volume->add_option("--b", eb, "Ellipsoid b / caliper perpendicular diameter, mm");
    auto* c_opt = volume->add_option("--c", ec, "Ellipsoid c, mm");
    volume->add_flag("--diameters", va.diameters, "Ellipsoid lengths are full diameters");
    volume->callback([&] {
        if (d_opt->count())
            va.d = d;
        if (a_opt->count())
            va.a = ea;
        if (b_opt->count())
            va.b = eb;
        if (c_opt->count())
            va.c = ec;
        action = [&] { return cmd_volume(va, out); };
    });

    std::string dsc_a, dsc_b;
    int dsc_label = 1;
    auto* dsc = app.add_subcommand("dsc", "Dice similarity coefficient of two masks");
    dsc->add_option("--a", dsc_a, "First label NRRD")->required();
    dsc->add_option("--b", dsc_b, "Second label NRRD")->required();
    dsc->add_option("--label", dsc_label, "Label compared")->capture_default_str();
    dsc->callback([&] { action = [&] { return cmd_dsc(dsc_a, dsc_b, dsc_label, out); }; });

    std::string csv, report_out, summary_out;
    auto* report = app.add_subcommand("report", "Summarise a manual vs automatic study");
    report->add_option("--csv", csv, "Study CSV")->required();
    report->add_option("--out", report_out, "Write the per-case CSV");
    report->add_option("--summary-out", summary_out, "Write the summary CSV");
    report->callback([&] { action = [&] { return cmd_report(csv, report_out, summary_out, out); }; });

    std::string host = "127.0.0.1";
    int port = 8080, idle = 30;
    auto* serve = app.add_subcommand("serve", "Run the HTTP segmentation service");
    serve->add_option("--host", host, "Bind address")->capture_default_str();
    serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
    serve->add_option("--idle-timeout", idle, "Session idle timeout, minutes")->capture_default_str();
    serve->callback([&] { action = [&] { return cmd_serve(host, port, idle, out); }; });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return k_exit_invalid;
    }

    try {
        return action ? action() : k_exit_invalid;
    } catch (const IoError& e) {
        err << "seedseg: error: " << e.what() << "\n";
        return k_exit_io;
    } catch (const std::exception& e) {
        err << "seedseg: error: " << e.what() << "\n";
        return k_exit_invalid;
    }
}

} // namespace seedseg::cli
