#include "seedseg/server.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "png.hpp"
#include "seedseg/error.hpp"
#include "seedseg/growcut.hpp"
#include "seedseg/morphology.hpp"
#include "seedseg/nrrd.hpp"
#include "seedseg/strokes.hpp"
#include "seedseg/volumetry.hpp"

namespace seedseg::server {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr const char* k_slice_boundary = "seedseg-slice";
constexpr std::size_t k_max_reported_conflicts = 100;

enum class JobState { idle, running, done, failed };

const char* to_string(JobState s) {
    switch (s) {
    case JobState::idle:
        return "idle";
    case JobState::running:
        return "running";
    case JobState::done:
        return "done";
    case JobState::failed:
        return "failed";
    }
    return "?";
}

struct Session {
    std::string id;
    // Immutable after upload; shared with running jobs.
    std::shared_ptr<const ScalarVolume> volume;
    float intensity_min = 0.0f;
    float intensity_max = 0.0f;
    Clock::time_point last_used;

    std::mutex mutex; // guards everything below
    std::vector<SeedStroke> strokes;
    std::optional<LabelVolume> segmentation;
    std::vector<std::string> history;
    JobState state = JobState::idle;
    std::string failure;
    std::optional<growcut::RunStats> stats;
    // Declared last so it is joined before the fields it writes are destroyed.
    std::jthread job;
};

struct HttpError {
    int status;
    std::string message;
    json extra = json::object();
};

json index_json(const Index3& v) { return json::array({v.x, v.y, v.z}); }

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json stroke_summary(const std::vector<SeedStroke>& strokes, const Dims& dims) {
    std::map<Label, std::set<std::size_t>> per_label;
    for (const auto& s : strokes)
        for (const auto& v : s.voxels)
            per_label[s.label].insert(dims.linear(v));
    json labels = json::array(), counts = json::array();
    for (const auto& [label, voxels] : per_label) {
        labels.push_back(label);
        counts.push_back(voxels.size());
    }
    return {{"stroke_count", strokes.size()}, {"labels", labels}, {"voxel_counts", counts}};
}

std::size_t distinct_labels(const std::vector<SeedStroke>& strokes) {
    std::set<Label> labels;
    for (const auto& s : strokes)
        labels.insert(s.label);
    return labels.size();
}

json stats_json(const growcut::RunStats& s) {
    return {{"iterations", s.iterations},
            {"converged", s.converged},
            {"wall_time_seconds", s.wall_time_seconds},
            {"changed_per_iteration", s.changed_per_iteration},
            {"roi", {{"min", index_json(s.roi.min)}, {"max", index_json(s.roi.max)}}}};
}

json volume_json(const LabelVolume& seg, const Vec3& spacing) {
    const auto v = volumetry::voxel_volume(select_label(seg, 1), spacing);
    return {{"label", 1}, {"voxel_count", v.voxel_count}, {"volume_mm3", v.volume_mm3}, {"volume_cm3", v.volume_cm3()}};
}

int parse_int_param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name))
        throw HttpError{400, std::string("missing query parameter '") + name + "'"};
    const auto s = req.get_param_value(name);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        throw HttpError{400, std::string("query parameter '") + name + "' must be an integer"};
    return v;
}

std::optional<double> parse_real_param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name))
        return std::nullopt;
    const auto s = req.get_param_value(name);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        throw HttpError{400, std::string("query parameter '") + name + "' must be a finite number"};
    return v;
}

json parse_json_body(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw HttpError{400, std::string("malformed JSON: ") + e.what()};
    }
}

growcut::Config parse_config(const std::string& body) {
    growcut::Config c;
    c.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (body.find_first_not_of(" \t\r\n") == std::string::npos)
        return c;
    const json j = parse_json_body(body);
    if (!j.is_object())
        throw HttpError{422, "segment body must be a JSON object"};
    const auto integer = [&](const std::string& key) {
        const auto& v = j.at(key);
        if (!v.is_number_integer())
            throw HttpError{422, "'" + key + "' must be an integer"};
        return v.get<int>();
    };
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "neighborhood" || key == "connectivity")
                c.neighborhood = connectivity_from_int(integer(key));
            else if (key == "roi_margin" || key == "margin")
                c.roi_margin = integer(key);
            else if (key == "max_iterations")
                c.max_iterations = integer(key);
            else if (key == "workers")
                c.workers = integer(key);
            else if (key == "precompute_similarity") {
                if (!value.is_boolean())
                    throw HttpError{422, "'precompute_similarity' must be a boolean"};
                c.precompute_similarity = value.get<bool>();
            } else
                throw HttpError{422, "unknown segment option '" + key + "'"};
        }
        c.validate();
    } catch (const Error& e) {
        throw HttpError{422, e.what()};
    }
    return c;
}

std::vector<std::uint8_t> window_level(const Slice<float>& s, double window, double level) {
    std::vector<std::uint8_t> out(s.values.size());
    const double lo = level - window / 2.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = s.values[i];
        double g;
        if (window <= 0.0)
            g = v < level ? 0.0 : v > level ? 255.0 : 128.0;
        else
            g = std::clamp((v - lo) / window * 255.0, 0.0, 255.0);
        out[i] = static_cast<std::uint8_t>(std::lround(g));
    }
    return out;
}

std::string multipart_slice(const json& header, std::span<const std::uint8_t> pixels) {
    const std::string b = std::string("--") + k_slice_boundary;
    std::string body;
    body += b + "\r\nContent-Type: application/json\r\n\r\n" + header.dump() + "\r\n";
    body += b + "\r\nContent-Type: application/octet-stream\r\n\r\n";
    body.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
    body += "\r\n" + b + "--\r\n";
    return body;
}

} // namespace

struct SegServer::Impl {
    explicit Impl(ServerOptions o) : options(o) {
        std::random_device rd;
        id_rng.seed((std::uint64_t{rd()} << 32) ^ rd());
        routes();
    }

    ~Impl() {
        http.stop();
        // Joins any job still running before the rest of the server goes away.
        std::lock_guard lock(sessions_mutex);
        sessions.clear();
    }

    ServerOptions options;
    httplib::Server http;

    std::mutex hook_mutex;
    std::function<void()> job_hook;

    mutable std::mutex sessions_mutex;
    std::mt19937_64 id_rng;
    std::map<std::string, std::shared_ptr<Session>> sessions;

    void routes();

    std::string new_id() {
        char buf[33];
        std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(id_rng()),
                      static_cast<unsigned long long>(id_rng()));
        return buf;
    }

    std::shared_ptr<Session> find(const std::string& id) {
        std::lock_guard lock(sessions_mutex);
        const auto it = sessions.find(id);
        if (it == sessions.end())
            throw HttpError{404, "unknown session '" + id + "'"};
        it->second->last_used = Clock::now();
        return it->second;
    }

    std::size_t evict_idle() {
        const auto now = Clock::now();
        std::lock_guard lock(sessions_mutex);
        std::size_t dropped = 0;
        for (auto it = sessions.begin(); it != sessions.end();) {
            auto& s = *it->second;
            bool idle = now - s.last_used >= options.idle_timeout;
            if (idle) {
                std::unique_lock session_lock(s.mutex, std::try_to_lock);
                idle = session_lock.owns_lock() && s.state != JobState::running;
            }
            if (idle) {
                it = sessions.erase(it);
                ++dropped;
            } else {
                ++it;
            }
        }
        return dropped;
    }

    // Wraps a handler with the error-to-status mapping.
    template <class F>
    httplib::Server::Handler guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const HttpError& e) {
                json body = e.extra;
                body["error"] = e.message;
                send_json(res, e.status, body);
            } catch (const std::exception& e) {
                send_json(res, 500, {{"error", e.what()}});
            }
        };
    }

    void create_session(const httplib::Request& req, httplib::Response& res);
    void get_slice(const httplib::Request& req, httplib::Response& res);
    void post_strokes(const httplib::Request& req, httplib::Response& res);
    void post_segment(const httplib::Request& req, httplib::Response& res);
    void post_postedit(const httplib::Request& req, httplib::Response& res);
};

void SegServer::Impl::create_session(const httplib::Request& req, httplib::Response& res) {
    std::string_view body = req.body;
    if (req.is_multipart_form_data() && !req.files.empty())
        body = req.files.begin()->second.content;
    if (body.empty())
        throw HttpError{400, "request body must carry an NRRD volume"};

    io::NrrdImage img = [&] {
        try {
            return io::parse_nrrd(body);
        } catch (const UnsupportedFormatError& e) {
            throw HttpError{422, e.what(), {{"field", e.field()}}};
        } catch (const Error& e) {
            throw HttpError{422, e.what()};
        }
    }();

    auto s = std::make_shared<Session>();
    s->volume = std::make_shared<const ScalarVolume>(std::move(img.volume));
    const auto [lo, hi] = std::minmax_element(s->volume->data().begin(), s->volume->data().end());
    s->intensity_min = *lo;
    s->intensity_max = *hi;
    s->last_used = Clock::now();

    evict_idle();
    {
        std::lock_guard lock(sessions_mutex);
        do
            s->id = new_id();
        while (sessions.contains(s->id));
        sessions.emplace(s->id, s);
    }
    const auto& d = s->volume->dims();
    send_json(res, 201,
              {{"session_id", s->id},
               {"dims", json::array({d.nx, d.ny, d.nz})},
               {"spacing", vec_json(s->volume->spacing())},
               {"origin", vec_json(s->volume->origin())},
               {"intensity_range", json::array({s->intensity_min, s->intensity_max})}});
}

void SegServer::Impl::get_slice(const httplib::Request& req, httplib::Response& res) {
    const auto s = find(req.matches[1]);
    const auto axis = [&] {
        if (!req.has_param("axis"))
            throw HttpError{400, "missing query parameter 'axis'"};
        try {
            return axis_from_string(req.get_param_value("axis"));
        } catch (const Error& e) {
            throw HttpError{400, e.what()};
        }
    }();
    const int index = parse_int_param(req, "index");
    const std::string layer = req.has_param("layer") ? req.get_param_value("layer") : "image";
    const std::string format = req.has_param("format") ? req.get_param_value("format") : "raw";
    if (format != "raw" && format != "png")
        throw HttpError{400, "format must be 'raw' or 'png'"};

    const Dims& d = s->volume->dims();
    const int extent = axis_extent(d, axis);
    if (index < 0 || index >= extent) {
        res.set_header("Content-Range", "slices */" + std::to_string(extent));
        throw HttpError{416, "index " + std::to_string(index) + " outside " + std::string(to_string(axis)) +
                                 " extent " + std::to_string(extent),
                        {{"extent", extent}}};
    }

    json header = {{"axis", to_string(axis)}, {"index", index}, {"layer", layer}, {"dtype", "uint8"}};
    std::vector<std::uint8_t> pixels;
    int rows = 0, cols = 0;
    double row_spacing = 0.0, col_spacing = 0.0;
    const auto take = [&](const auto& slice) {
        rows = slice.rows;
        cols = slice.cols;
        row_spacing = slice.row_spacing;
        col_spacing = slice.col_spacing;
    };

    if (layer == "image") {
        const double window = parse_real_param(req, "window").value_or(double(s->intensity_max) - s->intensity_min);
        const double level =
            parse_real_param(req, "level").value_or((double(s->intensity_max) + s->intensity_min) / 2.0);
        if (window < 0.0)
            throw HttpError{400, "window must be >= 0"};
        const auto slice = extract_slice(*s->volume, axis, index);
        take(slice);
        pixels = window_level(slice, window, level);
        header["window"] = window;
        header["level"] = level;
    } else if (layer == "labels" || layer == "segmentation") {
        std::optional<LabelVolume> source;
        {
            std::lock_guard lock(s->mutex);
            if (layer == "labels")
                source = rasterize_strokes(s->strokes, d, s->volume->geometry());
            else if (s->segmentation)
                source = *s->segmentation;
        }
        if (!source)
            throw HttpError{409, "session has no segmentation yet"};
        const auto slice = extract_slice(*source, axis, index);
        take(slice);
        pixels.assign(slice.values.begin(), slice.values.end());
    } else {
        throw HttpError{400, "layer must be 'image', 'labels' or 'segmentation'"};
    }

    header["rows"] = rows;
    header["cols"] = cols;
    header["row_spacing"] = row_spacing;
    header["col_spacing"] = col_spacing;
    res.set_header("X-Slice-Rows", std::to_string(rows));
    res.set_header("X-Slice-Cols", std::to_string(cols));
    res.set_header("X-Row-Spacing", json(row_spacing).dump());
    res.set_header("X-Col-Spacing", json(col_spacing).dump());
    if (format == "png") {
        res.set_content(detail::encode_png_gray8(cols, rows, pixels), "image/png");
    } else {
        res.set_content(multipart_slice(header, pixels),
                        std::string("multipart/mixed; boundary=") + k_slice_boundary);
    }
}

void SegServer::Impl::post_strokes(const httplib::Request& req, httplib::Response& res) {
    const auto s = find(req.matches[1]);
    const Dims& d = s->volume->dims();
    parse_json_body(req.body);
    io::StrokeFile file;
    try {
        file = io::parse_strokes(req.body, false);
        if (file.volume_dims && *file.volume_dims != d)
            throw ValidationError("volume_dims do not match the session volume");
        validate_strokes(file.strokes, d);
    } catch (const ValidationError& e) {
        json extra = json::object();
        if (e.item() >= 0)
            extra["stroke"] = e.item();
        throw HttpError{422, e.what(), extra};
    }

    std::lock_guard lock(s->mutex);
    std::map<std::size_t, Label> painted;
    for (const auto& st : s->strokes)
        for (const auto& v : st.voxels)
            painted.emplace(d.linear(v), st.label);
    json conflicts = json::array();
    std::size_t conflict_count = 0;
    for (const auto& st : file.strokes)
        for (const auto& v : st.voxels) {
            const auto [it, fresh] = painted.emplace(d.linear(v), st.label);
            if (!fresh && it->second != st.label) {
                if (conflict_count++ < k_max_reported_conflicts)
                    conflicts.push_back(index_json(v));
            }
        }
    if (conflict_count > 0)
        throw HttpError{422, std::to_string(conflict_count) + " voxel(s) already carry a different label",
                        {{"conflicts", conflicts}, {"conflict_count", conflict_count}}};

    s->strokes.insert(s->strokes.end(), file.strokes.begin(), file.strokes.end());
    send_json(res, 200, stroke_summary(s->strokes, d));
}

void SegServer::Impl::post_segment(const httplib::Request& req, httplib::Response& res) {
    const auto s = find(req.matches[1]);
    const auto config = parse_config(req.body);

    std::function<void()> hook;
    {
        std::lock_guard lock(hook_mutex);
        hook = job_hook;
    }

    std::lock_guard lock(s->mutex);
    if (s->state == JobState::running)
        throw HttpError{409, "a segmentation job is already running for this session"};
    if (distinct_labels(s->strokes) < 2)
        throw HttpError{422, "segmentation needs strokes with at least two distinct labels"};

    s->state = JobState::running;
    s->failure.clear();
    // The previous job has finished (state was not running), so this join is immediate.
    s->job = std::jthread([session = s.get(), volume = s->volume, strokes = s->strokes, config, hook] {
        if (hook)
            hook();
        try {
            auto result = growcut::run(*volume, strokes, config);
            std::lock_guard job_lock(session->mutex);
            session->segmentation = std::move(result.labels);
            session->stats = std::move(result.stats);
            session->history.clear();
            session->state = JobState::done;
        } catch (const std::exception& e) {
            std::lock_guard job_lock(session->mutex);
            session->failure = e.what();
            session->state = JobState::failed;
        }
    });
    send_json(res, 202, {{"state", to_string(JobState::running)}});
}

void SegServer::Impl::post_postedit(const httplib::Request& req, httplib::Response& res) {
    const auto s = find(req.matches[1]);
    std::string ops_text = req.body;
    Connectivity conn = Connectivity::twenty_six;
    const auto first = req.body.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && req.body[first] == '{') {
        const json j = parse_json_body(req.body);
        if (!j.contains("ops") || !j["ops"].is_string())
            throw HttpError{422, "postedit body needs a string field 'ops'"};
        ops_text = j["ops"].get<std::string>();
        if (j.contains("connectivity")) {
            try {
                conn = connectivity_from_int(j["connectivity"].is_number_integer() ? j["connectivity"].get<int>() : 0);
            } catch (const ValidationError& e) {
                throw HttpError{422, e.what()};
            }
        }
    }
    std::vector<morphology::PostEditOp> ops;
    try {
        ops = morphology::parse_pipeline(ops_text);
    } catch (const ValidationError& e) {
        throw HttpError{422, e.what()};
    }

    std::lock_guard lock(s->mutex);
    if (s->state == JobState::running)
        throw HttpError{409, "a segmentation job is running for this session"};
    if (!s->segmentation)
        throw HttpError{409, "session has no segmentation yet"};
    s->segmentation = morphology::apply_pipeline(select_label(*s->segmentation, 1), ops, conn);
    for (const auto& op : ops)
        s->history.push_back(op.to_string());
    json body = volume_json(*s->segmentation, s->volume->spacing());
    body["history"] = s->history;
    send_json(res, 200, body);
}

void SegServer::Impl::routes() {
    http.set_payload_max_length(options.max_upload_bytes);
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    http.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    const std::string session = R"(/sessions/([0-9a-f]+))";

    http.Post("/sessions", guarded([this](const auto& req, auto& res) { create_session(req, res); }));

    http.Get(session, guarded([this](const auto& req, auto& res) {
                 const auto s = find(req.matches[1]);
                 const auto& d = s->volume->dims();
                 std::lock_guard lock(s->mutex);
                 json body = {{"session_id", s->id},
                              {"dims", json::array({d.nx, d.ny, d.nz})},
                              {"spacing", vec_json(s->volume->spacing())},
                              {"origin", vec_json(s->volume->origin())},
                              {"intensity_range", json::array({s->intensity_min, s->intensity_max})},
                              {"strokes", stroke_summary(s->strokes, d)},
                              {"state", to_string(s->state)},
                              {"has_segmentation", s->segmentation.has_value()},
                              {"history", s->history}};
                 send_json(res, 200, body);
             }));

    http.Delete(session, guarded([this](const auto& req, auto& res) {
                    const auto s = find(req.matches[1]);
                    {
                        std::lock_guard lock(s->mutex);
                        if (s->state == JobState::running)
                            throw HttpError{409, "cannot delete a session while its job runs"};
                    }
                    std::lock_guard lock(sessions_mutex);
                    sessions.erase(s->id);
                    res.status = 204;
                }));

    http.Get(session + "/slice", guarded([this](const auto& req, auto& res) { get_slice(req, res); }));

    http.Post(session + "/strokes", guarded([this](const auto& req, auto& res) { post_strokes(req, res); }));
    http.Get(session + "/strokes", guarded([this](const auto& req, auto& res) {
                 const auto s = find(req.matches[1]);
                 std::lock_guard lock(s->mutex);
                 json body = stroke_summary(s->strokes, s->volume->dims());
                 body["document"] = json::parse(io::serialize_strokes({s->volume->dims(), s->strokes}));
                 send_json(res, 200, body);
             }));
    http.Delete(session + "/strokes", guarded([this](const auto& req, auto& res) {
                    const auto s = find(req.matches[1]);
                    std::lock_guard lock(s->mutex);
                    s->strokes.clear();
                    send_json(res, 200, stroke_summary(s->strokes, s->volume->dims()));
                }));

    http.Post(session + "/segment", guarded([this](const auto& req, auto& res) { post_segment(req, res); }));
    http.Get(session + "/segment", guarded([this](const auto& req, auto& res) {
                 const auto s = find(req.matches[1]);
                 std::lock_guard lock(s->mutex);
                 json body = {{"state", to_string(s->state)}};
                 if (s->state == JobState::failed)
                     body["reason"] = s->failure;
                 if (s->state == JobState::done && s->stats)
                     body["stats"] = stats_json(*s->stats);
                 send_json(res, 200, body);
             }));

    http.Post(session + "/postedit", guarded([this](const auto& req, auto& res) { post_postedit(req, res); }));

    http.Get(session + "/metrics", guarded([this](const auto& req, auto& res) {
                 const auto s = find(req.matches[1]);
                 std::lock_guard lock(s->mutex);
                 if (!s->segmentation)
                     throw HttpError{409, "session has no segmentation yet"};
                 send_json(res, 200, volume_json(*s->segmentation, s->volume->spacing()));
             }));

    http.Get(session + "/export", guarded([this](const auto& req, auto& res) {
                 const auto s = find(req.matches[1]);
                 std::string bytes;
                 {
                     std::lock_guard lock(s->mutex);
                     if (!s->segmentation)
                         throw HttpError{409, "session has no segmentation yet"};
                     bytes = io::encode_nrrd(*s->segmentation, io::Encoding::gzip);
                 }
                 res.set_header("Content-Disposition", "attachment; filename=\"segmentation.nrrd\"");
                 res.set_content(std::move(bytes), "application/octet-stream");
             }));
}

SegServer::SegServer(ServerOptions options) : m_impl(std::make_unique<Impl>(options)) {}

SegServer::~SegServer() = default;

bool SegServer::listen(const std::string& host, int port) { return m_impl->http.listen(host, port); }

int SegServer::bind_to_any_port(const std::string& host) { return m_impl->http.bind_to_any_port(host); }

bool SegServer::listen_after_bind() { return m_impl->http.listen_after_bind(); }

void SegServer::wait_until_ready() const { m_impl->http.wait_until_ready(); }

void SegServer::stop() { m_impl->http.stop(); }

std::size_t SegServer::evict_idle() { return m_impl->evict_idle(); }

std::size_t SegServer::session_count() const {
    std::lock_guard lock(m_impl->sessions_mutex);
    return m_impl->sessions.size();
}

void SegServer::set_job_hook(std::function<void()> hook) {
    std::lock_guard lock(m_impl->hook_mutex);
    m_impl->job_hook = std::move(hook);
}

} // namespace seedseg::server
