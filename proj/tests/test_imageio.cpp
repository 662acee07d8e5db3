#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <numbers>
#include <random>

#include "seedseg/error.hpp"
#include "seedseg/nrrd.hpp"
#include "seedseg/phantom.hpp"
#include "seedseg/strokes.hpp"
#include "seedseg/study_csv.hpp"
#include "study_rows.hpp"
#include "support.hpp"

using namespace seedseg;
using namespace seedseg::io;

namespace {

// Values representable in every supported pixel type.
ScalarVolume small_int_volume(const Dims& d, std::mt19937& rng) {
    std::uniform_int_distribution<int> u(0, 255);
    std::vector<float> v(d.voxel_count());
    for (auto& x : v)
        x = static_cast<float>(u(rng));
    return ScalarVolume(d, {{0.5, 0.75, 2.0}, {-10.5, 3.25, 0.0}}, std::move(v));
}

std::string payload_of(const std::string& file) {
    const auto end = file.find("\n\n");
    REQUIRE(end != std::string::npos);
    return file.substr(end + 2);
}

const std::string k_header2x2x2 = "NRRD0004\n"
                                  "type: uchar\n"
                                  "dimension: 3\n"
                                  "sizes: 2 2 2\n"
                                  "spacings: 0.5 0.5 3\n"
                                  "encoding: raw\n";

std::string with_payload(std::string header, std::string_view payload) {
    return header + "\n" + std::string(payload);
}

} // namespace

TEST_CASE("float volume round-trips bit-for-bit") {
    std::mt19937 rng(21);
    testing::TempDir dir("nrrd");
    const auto vol = testing::random_volume({8, 8, 8}, rng, -1000.0f, 1000.0f);
    for (auto enc : {Encoding::raw, Encoding::gzip}) {
        const auto path = dir / ("v" + std::string(to_string(enc)) + ".nrrd");
        write_nrrd(vol, path, enc);
        const auto back = read_nrrd(path);
        CHECK(back.encoding == enc);
        CHECK(back.type == PixelType::float32);
        CHECK(back.volume == vol);
        CHECK(std::memcmp(back.volume.data().data(), vol.data().data(), vol.data().size() * sizeof(float)) == 0);
    }
}

TEST_CASE("every type and encoding round-trips") {
    std::mt19937 rng(22);
    const auto vol = small_int_volume({5, 4, 3}, rng);
    for (auto type : {PixelType::uint8, PixelType::int16, PixelType::uint16, PixelType::int32, PixelType::float32})
        for (auto enc : {Encoding::raw, Encoding::gzip}) {
            CAPTURE(to_string(type));
            CAPTURE(to_string(enc));
            const auto img = parse_nrrd(encode_nrrd(vol, enc, type));
            CHECK(img.type == type);
            CHECK(img.volume.dims() == vol.dims());
            CHECK(img.volume.spacing() == vol.spacing());
            CHECK(img.volume.origin() == vol.origin());
            CHECK(img.volume == vol);
        }
}

TEST_CASE("raw and gzip encodings decode identically") {
    std::mt19937 rng(23);
    const auto vol = testing::random_volume({6, 7, 3}, rng);
    CHECK(parse_nrrd(encode_nrrd(vol, Encoding::raw)).volume == parse_nrrd(encode_nrrd(vol, Encoding::gzip)).volume);
}

TEST_CASE("gzip payload matches the raw payload through external gunzip") {
    if (std::system("gzip --version > /dev/null 2>&1") != 0) {
        MESSAGE("gzip not available, skipping");
        return;
    }
    std::mt19937 rng(24);
    testing::TempDir dir("gunzip");
    const auto vol = testing::random_volume({9, 5, 4}, rng);
    write_file(dir / "payload.gz", payload_of(encode_nrrd(vol, Encoding::gzip)));
    const auto cmd = "gzip -dc '" + (dir / "payload.gz").string() + "' > '" + (dir / "payload.raw").string() + "'";
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(read_file(dir / "payload.raw") == payload_of(encode_nrrd(vol, Encoding::raw)));
}

TEST_CASE("rewriting a read file is idempotent") {
    std::mt19937 rng(25);
    testing::TempDir dir("idem");
    const auto vol = testing::random_volume({4, 4, 4}, rng);
    write_nrrd(vol, dir / "a.nrrd");
    const auto a = read_nrrd(dir / "a.nrrd");
    write_nrrd(a.volume, dir / "b.nrrd");
    CHECK(read_nrrd(dir / "b.nrrd").volume == a.volume);
    CHECK(read_file(dir / "a.nrrd") == read_file(dir / "b.nrrd"));
}

TEST_CASE("label volumes are written as uchar") {
    const Dims d{3, 2, 2};
    const LabelVolume m(d, {{1, 2, 3}, {0, 0, 0}}, {0, 1, 2, 0, 1, 2, 255, 0, 0, 1, 1, 1});
    const auto text = encode_nrrd(m, Encoding::raw);
    CHECK(text.find("type: uchar\n") != std::string::npos);
    CHECK(text.find("endian") == std::string::npos);
    const auto img = parse_nrrd(text);
    CHECK(img.to_labels() == m);
    CHECK(payload_of(text).size() == d.voxel_count());

    const ScalarVolume frac(d, {}, std::vector<float>(12, 0.5f));
    CHECK_THROWS_AS(parse_nrrd(encode_nrrd(frac, Encoding::raw)).to_labels(), DomainError);
}

TEST_CASE("hand-written header parses") {
    const std::string payload{0, 1, 2, 3, 4, 5, 6, 7};
    const auto img = parse_nrrd(with_payload(k_header2x2x2, payload));
    CHECK(img.volume.dims() == Dims{2, 2, 2});
    CHECK(img.volume.spacing() == Vec3{0.5, 0.5, 3.0});
    CHECK(img.volume.at({1, 0, 0}) == 1.0f);
    CHECK(img.volume.at({0, 1, 1}) == 6.0f);

    // comments, key/value pairs and unknown fields are ignored
    const auto extra = parse_nrrd(with_payload("NRRD0005\n# note\nmodality:=MR\ncontent: scan\n" +
                                                   k_header2x2x2.substr(9),
                                               payload));
    CHECK(extra.volume == img.volume);

    // little-endian short with space directions and origin
    const std::string shorts = "NRRD0004\ntype: short\ndimension: 3\nsizes: 2 1 1\nendian: little\n"
                               "space directions: (1.5,0,0) (0,2,0) (0,0,4)\nspace origin: (1,2,3)\nencoding: raw\n";
    const std::string le{'\xff', '\xff', '\x02', '\x01'};
    const auto s = parse_nrrd(with_payload(shorts, le));
    CHECK(s.volume.data()[0] == -1.0f);
    CHECK(s.volume.data()[1] == 258.0f);
    CHECK(s.volume.spacing() == Vec3{1.5, 2.0, 4.0});
    CHECK(s.volume.origin() == Vec3{1.0, 2.0, 3.0});
}

TEST_CASE("unsupported headers name the offending field") {
    const std::string payload(8, '\0');
    const auto field_of = [&](const std::string& header) -> std::string {
        try {
            parse_nrrd(with_payload(header, payload));
        } catch (const UnsupportedFormatError& e) {
            return e.field();
        }
        return "<accepted>";
    };
    const auto replace = [&](std::string from, std::string to) {
        auto h = k_header2x2x2;
        h.replace(h.find(from), from.size(), to);
        return h;
    };
    CHECK(field_of(replace("dimension: 3\nsizes: 2 2 2", "dimension: 2\nsizes: 2 4")) == "dimension");
    CHECK(field_of(replace("uchar", "double")) == "type");
    CHECK(field_of(replace("raw", "bzip2")) == "encoding");
    CHECK(field_of(replace("encoding: raw\n", "encoding: raw\ndata file: x.raw\n")) == "data file");
    CHECK(field_of(replace("encoding: raw\n", "encoding: raw\nbyte skip: 4\n")) == "byte skip");
    CHECK(field_of(replace("uchar", "short")) == "endian");
    CHECK(field_of(replace("uchar", "short") + "endian: big\n") == "endian");
    CHECK(field_of(replace("spacings: 0.5 0.5 3", "space directions: (1,0.1,0) (0,1,0) (0,0,1)")) ==
          "space directions");
    CHECK(field_of("NRRD0009\n" + k_header2x2x2.substr(9)) == "magic");
}

TEST_CASE("damaged files are corrupt, not unsupported") {
    CHECK_THROWS_AS(parse_nrrd(with_payload(k_header2x2x2, std::string(7, '\0'))), CorruptFileError);
    CHECK_THROWS_AS(parse_nrrd(k_header2x2x2), CorruptFileError);

    std::mt19937 rng(26);
    const auto gz = encode_nrrd(testing::random_volume({4, 4, 4}, rng), Encoding::gzip);
    CHECK_THROWS_AS(parse_nrrd(gz.substr(0, gz.size() - 20)), CorruptFileError);
    auto flipped = gz;
    flipped[gz.find("\n\n") + 12] ^= 0x5a;
    CHECK_THROWS_AS(parse_nrrd(flipped), CorruptFileError);
    CHECK_THROWS_AS(gzip_decompress("not gzip at all"), CorruptFileError);
}

TEST_CASE("integer writers refuse values that do not fit") {
    const ScalarVolume vol({2, 1, 1}, {}, {-1.0f, 300.0f});
    CHECK_THROWS_AS(encode_nrrd(vol, Encoding::raw, PixelType::uint8), DomainError);
    CHECK_NOTHROW(encode_nrrd(vol, Encoding::raw, PixelType::int16));
    const ScalarVolume big({1, 1, 1}, {}, {3.0e9f});
    CHECK_THROWS_AS(encode_nrrd(big, Encoding::raw, PixelType::int32), DomainError);
}

TEST_CASE("empty volumes cannot be built, missing files are I/O errors") {
    CHECK_THROWS_AS(ScalarVolume({0, 0, 0}, {}, {}), PreconditionError);
    CHECK_THROWS_AS(read_nrrd("/nonexistent/dir/x.nrrd"), IoError);
    const LabelVolume m({1, 1, 1});
    CHECK_THROWS_AS(write_nrrd(m, "/nonexistent/dir/x.nrrd"), IoError);
}

TEST_CASE("strokes round-trip") {
    testing::TempDir dir("strokes");
    StrokeFile f{Dims{10, 10, 4}, {{1, {{1, 2, 3}, {4, 5, 0}}}, {2, {{9, 9, 3}}}, {1, {{0, 0, 0}}}}};
    write_strokes(f, dir / "s.json");
    CHECK(read_strokes(dir / "s.json") == f);
    CHECK(parse_strokes(serialize_strokes(f)) == f);
}

TEST_CASE("strokes validation reports the stroke index") {
    const auto index_of = [](const std::string& json) {
        try {
            parse_strokes(json);
        } catch (const ValidationError& e) {
            return e.item();
        }
        return -99;
    };
    CHECK(index_of(R"({"volume_dims":[4,4,4],"strokes":[{"label":1,"voxels":[[0,0,0]]},
                                                        {"label":2,"voxels":[[-1,0,0]]}]})") == 1);
    CHECK(index_of(R"({"volume_dims":[4,4,4],"strokes":[{"label":0,"voxels":[[0,0,0]]}]})") == 0);
    CHECK(index_of(R"({"volume_dims":[4,4,4],"strokes":[{"label":1,"voxels":[[4,0,0]]}]})") == 0);
    CHECK(index_of(R"({"volume_dims":[4,4,4],"strokes":[{"label":1,"voxels":[]}]})") == 0);
    CHECK(index_of(R"({"volume_dims":[4,4,4],"strokes":[{"label":1,"voxels":[[0,0]]}]})") == 0);
    CHECK(index_of(R"({"volume_dims":[4,4,4],"strokes":[{"label":1.5,"voxels":[[0,0,0]]}]})") == 0);
    CHECK_THROWS_AS(parse_strokes("{not json"), ValidationError);
    CHECK_THROWS_AS(parse_strokes(R"({"strokes":[]})"), ValidationError);
    CHECK_NOTHROW(parse_strokes(R"({"strokes":[{"label":1,"voxels":[[0,0,0]]}]})", false));
}

TEST_CASE("duplicate voxels within a label are dropped") {
    const auto f = parse_strokes(R"({"volume_dims":[4,4,4],"strokes":[
        {"label":1,"voxels":[[0,0,0],[1,0,0],[0,0,0]]},
        {"label":1,"voxels":[[1,0,0]]},
        {"label":2,"voxels":[[3,3,3]]}]})");
    REQUIRE(f.strokes.size() == 2);
    CHECK(f.strokes[0].voxels == std::vector<Index3>{{0, 0, 0}, {1, 0, 0}});
    CHECK(f.strokes[1].label == 2);
}

TEST_CASE("cube phantom without noise") {
    PhantomSpec spec;
    spec.dims = {20, 20, 20};
    spec.center = {10, 10, 10};
    spec.size = 3;
    const auto p = generate_phantom(spec);
    CHECK(count_label(p.truth, 1) == 7 * 7 * 7);
    for (std::size_t i = 0; i < p.image.data().size(); ++i) {
        const float v = p.image.data()[i];
        CHECK((v == 100.0f || v == 0.0f));
        CHECK((v == 100.0f) == (p.truth.data()[i] == 1));
    }
    CHECK(p.truth.at({7, 7, 7}) == 1);
    CHECK(p.truth.at({6, 7, 7}) == 0);
    CHECK(p.truth.at({13, 13, 13}) == 1);
}

TEST_CASE("phantoms are deterministic per seed") {
    PhantomSpec spec;
    spec.noise_sigma = 5.0;
    spec.rng_seed = 42;
    CHECK(generate_phantom(spec).image == generate_phantom(spec).image);
    auto other = spec;
    other.rng_seed = 43;
    CHECK_FALSE(generate_phantom(other).image == generate_phantom(spec).image);
}

TEST_CASE("ball phantom volume is close to the analytic ball") {
    PhantomSpec spec;
    spec.shape = PhantomShape::ball;
    spec.size = 8;
    const auto n = static_cast<double>(count_label(generate_phantom(spec).truth, 1));
    const double exact = 4.0 / 3.0 * std::numbers::pi * 512.0;
    CHECK(std::fabs(n - exact) / exact < 0.05);
}

TEST_CASE("phantom preconditions") {
    PhantomSpec spec;
    spec.fg_intensity = spec.bg_intensity;
    CHECK_THROWS_AS(generate_phantom(spec), PreconditionError);
    spec = {};
    spec.size = 16;
    CHECK_THROWS_AS(generate_phantom(spec), PreconditionError);
    spec = {};
    spec.noise_sigma = -1;
    CHECK_THROWS_AS(generate_phantom(spec), PreconditionError);
}

TEST_CASE("phantom strokes stay in their regions and span the volume") {
    for (auto shape : {PhantomShape::cube, PhantomShape::ball}) {
        PhantomSpec spec;
        spec.shape = shape;
        const auto p = generate_phantom(spec);
        const auto strokes = phantom_strokes(spec);
        REQUIRE(strokes.size() == 2);
        CHECK_NOTHROW(validate_strokes(strokes, spec.dims));
        for (const auto& v : strokes[0].voxels)
            CHECK(p.truth.at(v) == 1);
        for (const auto& v : strokes[1].voxels)
            CHECK(p.truth.at(v) == 0);
        Index3 lo{1 << 20, 1 << 20, 1 << 20}, hi{-1, -1, -1};
        for (const auto& s : strokes)
            for (const auto& v : s.voxels) {
                lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
                hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
            }
        CHECK(lo == Index3{0, 0, 0});
        CHECK(hi == Index3{spec.dims.nx - 1, spec.dims.ny - 1, spec.dims.nz - 1});
    }
}

TEST_CASE("study CSV parses the reference table") {
    const auto rows = read_study_csv(SEEDSEG_TEST_DATA "/study10.csv");
    const auto expected = testing::study_rows();
    REQUIRE(rows.size() == expected.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].case_id == expected[i].case_id);
        CHECK(rows[i].manual_volume_mm3 == expected[i].manual_volume_mm3);
        CHECK(rows[i].auto_volume_mm3 == expected[i].auto_volume_mm3);
        CHECK(rows[i].manual_voxels == expected[i].manual_voxels);
        CHECK(rows[i].auto_voxels == expected[i].auto_voxels);
        CHECK(rows[i].dsc_percent == expected[i].dsc_percent);
    }
    const auto again = parse_study_csv(format_study_csv(rows));
    CHECK(again.size() == rows.size());
    CHECK(again[9].manual_volume_mm3 == 757.007);
}

TEST_CASE("study CSV errors carry the line number") {
    const auto line_of = [](const std::string& text) {
        try {
            parse_study_csv(text);
        } catch (const ValidationError& e) {
            return e.item();
        }
        return -99;
    };
    const std::string h = std::string(k_study_csv_header) + "\n";
    CHECK(line_of("case,a,b\n1,2,3\n") == 1);
    CHECK(line_of(h + "1,2,3,4,5,6\n1,2,3\n") == 3);
    CHECK(line_of(h + "1,x,3,4,5,6\n") == 2);
    CHECK(line_of(h + "1,2,3,4,5,150\n") == 2);
    CHECK(line_of(h + "1,-2,3,4,5,50\n") == 2);
    CHECK_THROWS_AS(parse_study_csv(""), ValidationError);
    CHECK(parse_study_csv(h).empty());
}

TEST_CASE("summary CSV layout") {
    const auto text = format_summary_csv(metrics::study_report(testing::study_rows()));
    CHECK(text ==
          "statistic,manual_cm3,auto_cm3,manual_voxels,auto_voxels,dsc_percent\n"
          "min,0.76,1.02,4457,5828,75.60\n"
          "max,15.27,15.84,104133,108005,85.87\n"
          "mean,6.37,6.47,48082.1,48056.9,81.97\n"
          "std,3.96,4.14,,,3.39\n");
}
