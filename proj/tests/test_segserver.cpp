#include <doctest.h>

#include <future>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <zlib.h>

#include "seedseg/cli.hpp"
#include "seedseg/metrics.hpp"
#include "seedseg/morphology.hpp"
#include "seedseg/nrrd.hpp"
#include "seedseg/phantom.hpp"
#include "seedseg/server.hpp"
#include "seedseg/strokes.hpp"
#include "seedseg/volumetry.hpp"
#include "support.hpp"

using namespace seedseg;
using json = nlohmann::json;

namespace {

// Server on a free local port for the lifetime of the fixture.
class Running {
  public:
    explicit Running(server::ServerOptions options = {}) : m_server(options) {
        m_port = m_server.bind_to_any_port("127.0.0.1");
        REQUIRE(m_port > 0);
        m_thread = std::thread([this] { m_server.listen_after_bind(); });
        m_server.wait_until_ready();
    }
    ~Running() {
        m_server.stop();
        m_thread.join();
    }

    server::SegServer& server() { return m_server; }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", m_port);
        c.set_read_timeout(60);
        return c;
    }

  private:
    server::SegServer m_server;
    int m_port = -1;
    std::thread m_thread;
};

io::PhantomSpec small_spec() {
    io::PhantomSpec spec;
    spec.dims = {16, 16, 16};
    spec.center = {8, 8, 8};
    spec.size = 4;
    spec.noise_sigma = 5;
    spec.rng_seed = 3;
    spec.spacing = {0.5, 0.5, 1.0};
    return spec;
}

std::string upload(httplib::Client& c, const ScalarVolume& vol) {
    const auto res = c.Post("/sessions", io::encode_nrrd(vol, io::Encoding::gzip), "application/octet-stream");
    REQUIRE(res);
    REQUIRE(res->status == 201);
    return json::parse(res->body)["session_id"].get<std::string>();
}

std::string strokes_json(const std::vector<SeedStroke>& strokes) { return io::serialize_strokes({std::nullopt, strokes}); }

json wait_done(httplib::Client& c, const std::string& id) {
    for (int i = 0; i < 2000; ++i) {
        const auto res = c.Get("/sessions/" + id + "/segment");
        REQUIRE(res);
        auto body = json::parse(res->body);
        if (body["state"] != "running")
            return body;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    FAIL("segmentation job did not finish");
    return {};
}

struct SlicePart {
    json header;
    std::string pixels;
};

SlicePart split_multipart(const httplib::Result& res) {
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const auto type = res->get_header_value("Content-Type");
    REQUIRE(type.starts_with("multipart/mixed; boundary="));
    const std::string boundary = "--" + type.substr(type.find('=') + 1);
    const auto& b = res->body;
    const auto json_start = b.find("\r\n\r\n") + 4;
    const auto json_end = b.find("\r\n" + boundary, json_start);
    SlicePart part{json::parse(b.substr(json_start, json_end - json_start)), {}};
    const auto bin_start = b.find("\r\n\r\n", json_end) + 4;
    const auto bin_end = b.rfind("\r\n" + boundary + "--");
    part.pixels = b.substr(bin_start, bin_end - bin_start);
    return part;
}

} // namespace

TEST_CASE("session upload") {
    Running srv;
    auto c = srv.client();
    const ScalarVolume vol({8, 8, 8}, {{0.5, 0.5, 2.0}, {1, 2, 3}}, std::vector<float>(512, 3.0f));
    const auto res = c.Post("/sessions", io::encode_nrrd(vol, io::Encoding::raw), "application/octet-stream");
    REQUIRE(res);
    CHECK(res->status == 201);
    const auto body = json::parse(res->body);
    CHECK(body["dims"] == json::array({8, 8, 8}));
    CHECK(body["spacing"] == json::array({0.5, 0.5, 2.0}));
    CHECK(srv.server().session_count() == 1);

    const auto info = c.Get("/sessions/" + body["session_id"].get<std::string>());
    REQUIRE(info);
    CHECK(info->status == 200);
    CHECK(json::parse(info->body)["state"] == "idle");

    const auto empty = c.Post("/sessions", "", "application/octet-stream");
    REQUIRE(empty);
    CHECK(empty->status == 400);

    const std::string two_d = "NRRD0004\ntype: uchar\ndimension: 2\nsizes: 2 2\nencoding: raw\n\n\x01\x02\x03\x04";
    const auto bad = c.Post("/sessions", two_d, "application/octet-stream");
    REQUIRE(bad);
    CHECK(bad->status == 422);
    CHECK(json::parse(bad->body)["field"] == "dimension");

    CHECK(c.Get("/sessions/0123abcd")->status == 404);
    CHECK(c.Get("/sessions/0123abcd/slice?axis=axial&index=0")->status == 404);
}

TEST_CASE("slices") {
    Running srv;
    auto c = srv.client();
    const auto vol = testing::ramp_volume({4, 3, 2});
    const auto id = upload(c, vol);
    const auto base = "/sessions/" + id + "/slice";

    const auto img = split_multipart(c.Get(base + "?axis=axial&index=1"));
    CHECK(img.header["rows"] == 3);
    CHECK(img.header["cols"] == 4);
    CHECK(img.header["dtype"] == "uint8");
    REQUIRE(img.pixels.size() == 12);
    // full-range window: value 23 is the maximum
    CHECK(static_cast<unsigned char>(img.pixels.back()) == 255);
    CHECK(static_cast<unsigned char>(img.pixels.front()) == 133);

    const auto sag = split_multipart(c.Get(base + "?axis=sagittal&index=0&layer=image&window=0&level=12"));
    CHECK(sag.header["rows"] == 2);
    CHECK(sag.header["cols"] == 3);
    CHECK(sag.pixels == std::string("\x00\x00\x00\x80\xff\xff", 6));

    const auto labels = split_multipart(c.Get(base + "?axis=coronal&index=2&layer=labels"));
    CHECK(labels.pixels == std::string(8, '\0'));

    CHECK(c.Get(base + "?axis=axial&index=2")->status == 416);
    CHECK(c.Get(base + "?axis=axial&index=-1")->status == 416);
    CHECK(c.Get(base + "?axis=oblique&index=0")->status == 400);
    CHECK(c.Get(base + "?axis=axial")->status == 400);
    CHECK(c.Get(base + "?axis=axial&index=0&layer=paint")->status == 400);
    CHECK(c.Get(base + "?axis=axial&index=0&window=-3")->status == 400);
    CHECK(c.Get(base + "?axis=axial&index=0&layer=segmentation")->status == 409);
}

TEST_CASE("constant volumes render uniformly; PNG output decodes") {
    Running srv;
    auto c = srv.client();
    const auto id = upload(c, ScalarVolume({5, 6, 7}, {}, std::vector<float>(210, 42.0f)));
    const auto gray = split_multipart(c.Get("/sessions/" + id + "/slice?axis=coronal&index=3"));
    REQUIRE(gray.pixels.size() == 35);
    CHECK(std::all_of(gray.pixels.begin(), gray.pixels.end(), [&](char p) { return p == gray.pixels[0]; }));

    const auto png = c.Get("/sessions/" + id + "/slice?axis=axial&index=0&format=png");
    REQUIRE(png);
    CHECK(png->status == 200);
    CHECK(png->get_header_value("Content-Type") == "image/png");
    const auto& b = png->body;
    REQUIRE(b.size() > 33);
    CHECK(b.substr(0, 8) == std::string("\x89PNG\r\n\x1a\n", 8));
    CHECK(b.substr(12, 4) == "IHDR");
    const auto be32 = [&](std::size_t at) {
        return (std::uint32_t(std::uint8_t(b[at])) << 24) | (std::uint32_t(std::uint8_t(b[at + 1])) << 16) |
               (std::uint32_t(std::uint8_t(b[at + 2])) << 8) | std::uint32_t(std::uint8_t(b[at + 3]));
    };
    CHECK(be32(16) == 5);
    CHECK(be32(20) == 6);
    CHECK(be32(29) == crc32(0, reinterpret_cast<const Bytef*>(b.data() + 12), 17));
    const auto idat_len = be32(33);
    REQUIRE(b.substr(37, 4) == "IDAT");
    std::vector<Bytef> raw(6 * 6);
    uLongf raw_len = raw.size();
    REQUIRE(uncompress(raw.data(), &raw_len, reinterpret_cast<const Bytef*>(b.data() + 41), idat_len) == Z_OK);
    CHECK(raw_len == 36);
    for (int r = 0; r < 6; ++r) {
        CHECK(raw[r * 6] == 0); // filter byte
        for (int x = 1; x < 6; ++x)
            CHECK(raw[r * 6 + x] == static_cast<Bytef>(gray.pixels[0]));
    }
}

TEST_CASE("strokes accumulate, conflict and clear") {
    Running srv;
    auto c = srv.client();
    const auto id = upload(c, ScalarVolume({8, 8, 8}, {}, std::vector<float>(512, 1.0f)));
    const auto path = "/sessions/" + id + "/strokes";

    auto res = c.Post(path, strokes_json({{1, {{1, 1, 1}, {2, 1, 1}}}, {2, {{7, 7, 7}}}}), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    auto body = json::parse(res->body);
    CHECK(body["labels"] == json::array({1, 2}));
    CHECK(body["voxel_counts"] == json::array({2, 1}));

    res = c.Post(path, strokes_json({{1, {{2, 1, 1}, {3, 1, 1}}}}), "application/json");
    CHECK(json::parse(res->body)["voxel_counts"] == json::array({3, 1}));
    CHECK(json::parse(res->body)["stroke_count"] == 3);

    res = c.Post(path, strokes_json({{2, {{1, 1, 1}}}}), "application/json");
    CHECK(res->status == 422);
    CHECK(json::parse(res->body)["conflicts"] == json::array({json::array({1, 1, 1})}));

    res = c.Post(path, strokes_json({{1, {{8, 0, 0}}}}), "application/json");
    CHECK(res->status == 422);
    CHECK(c.Post(path, R"({"volume_dims":[4,4,4],"strokes":[{"label":1,"voxels":[[0,0,0]]}]})", "application/json")
              ->status == 422);
    CHECK(c.Post(path, "{oops", "application/json")->status == 400);

    const auto labels = split_multipart(c.Get("/sessions/" + id + "/slice?axis=axial&index=1&layer=labels"));
    CHECK(labels.pixels[1 * 8 + 1] == 1);
    CHECK(labels.pixels[1 * 8 + 3] == 1);
    CHECK(labels.pixels[0] == 0);

    const auto listed = json::parse(c.Get(path)->body);
    CHECK(listed["document"]["strokes"].size() == 3);

    res = c.Delete(path);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body)["stroke_count"] == 0);
    const auto cleared = split_multipart(c.Get("/sessions/" + id + "/slice?axis=axial&index=1&layer=labels"));
    CHECK(cleared.pixels == std::string(64, '\0'));
}

TEST_CASE("segment job lifecycle") {
    Running srv;
    auto c = srv.client();
    const auto spec = small_spec();
    const auto phantom = io::generate_phantom(spec);
    const auto id = upload(c, phantom.image);
    const auto base = "/sessions/" + id;

    CHECK(json::parse(c.Get(base + "/segment")->body)["state"] == "idle");
    CHECK(c.Post(base + "/postedit", "islands:keep_largest", "text/plain")->status == 409);
    CHECK(c.Get(base + "/metrics")->status == 409);
    CHECK(c.Get(base + "/export")->status == 409);

    c.Post(base + "/strokes", strokes_json({io::phantom_strokes(spec)[0]}), "application/json");
    CHECK(c.Post(base + "/segment", "", "application/json")->status == 422);
    c.Post(base + "/strokes", strokes_json({io::phantom_strokes(spec)[1]}), "application/json");

    CHECK(c.Post(base + "/segment", R"({"connectivity": 7})", "application/json")->status == 422);
    CHECK(c.Post(base + "/segment", R"({"workers": 0})", "application/json")->status == 422);
    CHECK(c.Post(base + "/segment", R"({"speed": 3})", "application/json")->status == 422);
    CHECK(c.Post(base + "/segment", R"({"workers": )", "application/json")->status == 400);

    std::promise<void> release;
    auto gate = release.get_future().share();
    srv.server().set_job_hook([gate] { gate.wait(); });
    CHECK(c.Post(base + "/segment", R"({"workers": 2})", "application/json")->status == 202);
    CHECK(json::parse(c.Get(base + "/segment")->body)["state"] == "running");
    CHECK(c.Post(base + "/segment", "", "application/json")->status == 409);
    CHECK(c.Post(base + "/postedit", "dilate:1", "text/plain")->status == 409);
    CHECK(c.Delete(base)->status == 409);
    release.set_value();
    srv.server().set_job_hook({});

    const auto done = wait_done(c, id);
    CHECK(done["state"] == "done");
    CHECK(done["stats"]["converged"] == true);
    CHECK(done["stats"]["iterations"].get<int>() > 0);

    const auto m = json::parse(c.Get(base + "/metrics")->body);
    const auto seg = io::parse_nrrd(c.Get(base + "/export")->body).to_labels();
    const auto expected = volumetry::voxel_volume(select_label(seg, 1), spec.spacing);
    CHECK(m["voxel_count"] == expected.voxel_count);
    CHECK(m["volume_mm3"].get<double>() == expected.volume_mm3);
    CHECK(seg.geometry().spacing == spec.spacing);
    CHECK(metrics::dsc(select_label(seg, 1), phantom.truth) >= 0.95);

    const auto seg_slice = split_multipart(c.Get(base + "/slice?axis=axial&index=8&layer=segmentation"));
    CHECK(seg_slice.pixels[8 * 16 + 8] == 1);
    CHECK(seg_slice.pixels[0] == 2);
}

TEST_CASE("postedit") {
    Running srv;
    auto c = srv.client();
    const auto spec = small_spec();
    const auto id = upload(c, io::generate_phantom(spec).image);
    const auto base = "/sessions/" + id;
    c.Post(base + "/strokes", strokes_json(io::phantom_strokes(spec)), "application/json");
    c.Post(base + "/segment", R"({"workers": 1})", "application/json");
    wait_done(c, id);
    const auto seg = io::parse_nrrd(c.Get(base + "/export")->body).to_labels();

    CHECK(c.Post(base + "/postedit", "islands:huge", "text/plain")->status == 422);
    CHECK(c.Post(base + "/postedit", R"({"ops": 3})", "application/json")->status == 422);

    auto res = c.Post(base + "/postedit", R"({"ops": "dilate:1", "connectivity": 6})", "application/json");
    REQUIRE(res->status == 200);
    auto body = json::parse(res->body);
    const auto dilated = morphology::dilate(select_label(seg, 1), Connectivity::six);
    CHECK(body["voxel_count"] == count_label(dilated, 1));
    CHECK(body["history"] == json::array({"dilate:1"}));

    res = c.Post(base + "/postedit", "erode:1,islands:keep_largest", "text/plain");
    body = json::parse(res->body);
    CHECK(body["history"] == json::array({"dilate:1", "erode:1", "islands:keep_largest"}));
    const auto exported = io::parse_nrrd(c.Get(base + "/export")->body).to_labels();
    CHECK(exported.is_binary());
    CHECK(json::parse(c.Get(base + "/metrics")->body)["voxel_count"] == count_label(exported, 1));
}

TEST_CASE("re-running with the same strokes is byte-identical; corrective strokes accumulate") {
    Running srv;
    auto c = srv.client();
    // Two touching boxes of equal brightness: a single foreground seed
    // floods both, a background stroke in the second box splits them.
    const Dims d{16, 8, 8};
    std::vector<float> v(d.voxel_count(), 0.0f);
    for (int z = 2; z < 6; ++z)
        for (int y = 2; y < 6; ++y)
            for (int x = 2; x < 14; ++x)
                v[d.linear({x, y, z})] = 100.0f;
    const auto id = upload(c, ScalarVolume(d, {}, v));
    const auto base = "/sessions/" + id;
    c.Post(base + "/strokes", strokes_json({{1, {{3, 3, 3}}}, {2, {{0, 0, 0}, {15, 7, 7}}}}), "application/json");

    c.Post(base + "/segment", "", "application/json");
    wait_done(c, id);
    const auto first = c.Get(base + "/export")->body;
    c.Post(base + "/segment", "", "application/json");
    wait_done(c, id);
    CHECK(c.Get(base + "/export")->body == first);
    const auto before = json::parse(c.Get(base + "/metrics")->body)["voxel_count"].get<std::size_t>();
    CHECK(before == 4 * 4 * 12);

    const auto res = c.Post(base + "/strokes", strokes_json({{2, {{12, 3, 3}, {12, 4, 4}}}}), "application/json");
    CHECK(json::parse(res->body)["stroke_count"] == 3);
    c.Post(base + "/segment", "", "application/json");
    CHECK(wait_done(c, id)["state"] == "done");
    const auto after = json::parse(c.Get(base + "/metrics")->body)["voxel_count"].get<std::size_t>();
    CHECK(after < before);
    CHECK(c.Get(base + "/export")->body != first);
}

TEST_CASE("exported mask matches the CLI for identical inputs") {
    testing::TempDir dir("srv-cli");
    const auto spec = small_spec();
    const auto phantom = io::generate_phantom(spec);
    const auto strokes = io::phantom_strokes(spec);
    io::write_nrrd(phantom.image, dir / "img.nrrd");
    io::write_strokes({spec.dims, strokes}, dir / "s.json");
    std::ostringstream out, err;
    const std::vector<std::string> seg_args{"segment", "--volume", (dir / "img.nrrd").string(), "--strokes",
                                            (dir / "s.json").string(), "--out", (dir / "cli.nrrd").string()};
    REQUIRE(cli::run(seg_args, out, err) == 0);
    const std::vector<std::string> post_args{"postprocess", "--mask", (dir / "cli.nrrd").string(), "--out",
                                             (dir / "cli_post.nrrd").string(), "--ops", "islands:keep_largest"};
    REQUIRE(cli::run(post_args, out, err) == 0);

    Running srv;
    auto c = srv.client();
    const auto id = upload(c, phantom.image);
    const auto base = "/sessions/" + id;
    c.Post(base + "/strokes", strokes_json(strokes), "application/json");
    c.Post(base + "/segment", "", "application/json");
    wait_done(c, id);
    CHECK(c.Get(base + "/export")->body == io::read_file(dir / "cli.nrrd"));
    c.Post(base + "/postedit", "islands:keep_largest", "text/plain");
    CHECK(c.Get(base + "/export")->body == io::read_file(dir / "cli_post.nrrd"));

    const std::vector<std::string> dsc_args{"dsc", "--a", (dir / "cli_post.nrrd").string(), "--b",
                                            (dir / "cli_post.nrrd").string()};
    std::ostringstream dsc_out;
    REQUIRE(cli::run(dsc_args, dsc_out, err) == 0);
    CHECK(dsc_out.str() == "1.0000\n");
}

TEST_CASE("idle sessions are evicted, busy ones kept") {
    server::ServerOptions options;
    options.idle_timeout = std::chrono::seconds(0);
    Running srv(options);
    auto c = srv.client();
    const auto spec = small_spec();
    const auto busy = upload(c, io::generate_phantom(spec).image);
    c.Post("/sessions/" + busy + "/strokes", strokes_json(io::phantom_strokes(spec)), "application/json");

    std::promise<void> release;
    auto gate = release.get_future().share();
    srv.server().set_job_hook([gate] { gate.wait(); });
    REQUIRE(c.Post("/sessions/" + busy + "/segment", "", "application/json")->status == 202);
    // creating a session sweeps idle ones first; the running job survives it
    const auto idle = upload(c, io::generate_phantom(spec).image);
    CHECK(srv.server().session_count() == 2);
    CHECK(srv.server().evict_idle() == 1);
    CHECK(c.Get("/sessions/" + idle)->status == 404);
    release.set_value();
    CHECK(wait_done(c, busy)["state"] == "done");
    CHECK(c.Delete("/sessions/" + busy)->status == 204);
    CHECK(srv.server().session_count() == 0);
}

TEST_CASE("requests across sessions run concurrently") {
    Running srv;
    const auto spec = small_spec();
    const auto image = io::generate_phantom(spec).image;
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&] {
            auto c = srv.client();
            const auto id = upload(c, image);
            c.Post("/sessions/" + id + "/strokes", strokes_json(io::phantom_strokes(spec)), "application/json");
            c.Post("/sessions/" + id + "/segment", R"({"workers": 1})", "application/json");
            if (wait_done(c, id)["state"] == "done")
                ++ok;
        });
    for (auto& t : threads)
        t.join();
    CHECK(ok == 4);
    CHECK(srv.server().session_count() == 4);
}
