#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <tiffio.h>
#include <unistd.h>

#include "spinem/errors.hpp"
#include "spinem/io.hpp"

using namespace spinem;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("spinem_io_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path operator/(const std::string& name) const { return path / name; }
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ImageD random_image(int rows, int cols, double scale, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, scale);
    ImageD img(rows, cols);
    for (Eigen::Index k = 0; k < img.size(); ++k) img.data()[k] = u(gen);
    return img;
}

template <typename T>
void write_tiff(const fs::path& p, const ImageD& img, int bits, int format) {
    TIFF* t = TIFFOpen(p.c_str(), "w");
    REQUIRE(t != nullptr);
    TIFFSetField(t, TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(img.cols()));
    TIFFSetField(t, TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(img.rows()));
    TIFFSetField(t, TIFFTAG_BITSPERSAMPLE, bits);
    TIFFSetField(t, TIFFTAG_SAMPLESPERPIXEL, 1);
    TIFFSetField(t, TIFFTAG_SAMPLEFORMAT, format);
    TIFFSetField(t, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
    TIFFSetField(t, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    std::vector<T> row(static_cast<std::size_t>(img.cols()));
    for (Eigen::Index r = 0; r < img.rows(); ++r) {
        for (Eigen::Index c = 0; c < img.cols(); ++c) row[static_cast<std::size_t>(c)] = static_cast<T>(img(r, c));
        TIFFWriteScanline(t, row.data(), static_cast<std::uint32_t>(r), 0);
    }
    TIFFClose(t);
}

}  // namespace

TEST_CASE("float image round trip is bit exact") {
    TempDir dir;
    DetectorImage img;
    img.pixels = quantize_to_float(random_image(70, 90, 1e4, 1));
    img.camera.width_px = 90;
    img.camera.height_px = 70;
    img.camera.background_counts = 2.5;
    img.meta.b0 = 0.17463;
    img.meta.angular_frequency = 3.07e10;
    img.meta.probe_y = 160e-6;
    img.meta.n_phases = 4096;
    img.meta.seed = 0xfedcba9876543210ULL;
    img.meta.index = 12;
    img.meta.frame = 3;
    img.meta.clipped_fraction = 1.25e-9;
    io::write_spnm(dir / "a.spnm", img, {{"detuning_T", -1.4e-4}});

    std::map<std::string, double> extra;
    const DetectorImage back = io::read_spnm(dir / "a.spnm", &extra);
    CHECK((back.pixels == img.pixels).all());
    CHECK(back.camera.width_px == 90);
    CHECK(back.camera.background_counts == 2.5);
    CHECK(back.camera.pixel_pitch == img.camera.pixel_pitch);
    CHECK(back.meta.b0 == img.meta.b0);
    CHECK(back.meta.angular_frequency == img.meta.angular_frequency);
    CHECK(back.meta.probe_y == img.meta.probe_y);
    CHECK(back.meta.seed == img.meta.seed);
    CHECK(back.meta.index == 12);
    CHECK(back.meta.frame == 3);
    CHECK(back.meta.clipped_fraction == img.meta.clipped_fraction);
    CHECK(extra.at("detuning_T") == -1.4e-4);

    const std::string bytes = slurp(dir / "a.spnm");
    CHECK(bytes.substr(0, 8) == "SPNMIMG1");
    write_file(dir / "short.spnm", bytes.substr(0, bytes.size() - 10));
    CHECK_THROWS_AS(io::read_spnm(dir / "short.spnm"), IoError);
    write_file(dir / "bad.spnm", "NOTANIMG" + bytes.substr(8));
    CHECK_THROWS_AS(io::read_spnm(dir / "bad.spnm"), IoError);
    CHECK_THROWS_AS(io::read_spnm(dir / "missing.spnm"), IoError);
}

TEST_CASE("16-bit PNG keeps its scale") {
    TempDir dir;
    const ImageD img = random_image(40, 50, 3e6, 2);
    const double scale = io::write_png16(dir / "a.png", img);
    CHECK(scale == doctest::Approx(img.maxCoeff() / 65535.0));
    const ImageD back = io::read_png(dir / "a.png");
    REQUIRE(back.rows() == 40);
    REQUIRE(back.cols() == 50);
    CHECK(((back - img).abs() <= 0.5 * scale * (1 + 1e-12)).all());

    const ImageD counts = ImageD::Constant(8, 8, 17.0);
    io::write_png16(dir / "c.png", counts, 1.0);
    CHECK((io::read_png(dir / "c.png") == 17.0).all());

    io::write_diverging_png(dir / "d.png", random_image(10, 10, 1.0, 3) - 0.5);
    CHECK(slurp(dir / "d.png").substr(1, 3) == "PNG");
    CHECK_THROWS_AS(io::read_png(dir / "d.png"), IoError);
}

TEST_CASE("TIFF frames") {
    TempDir dir;
    const ImageD img = random_image(30, 45, 60000.0, 4).floor();
    write_tiff<std::uint16_t>(dir / "a.tif", img, 16, SAMPLEFORMAT_UINT);
    CHECK((io::read_tiff(dir / "a.tif") == img).all());

    const ImageD f = quantize_to_float(random_image(30, 45, 1e3, 5));
    write_tiff<float>(dir / "b.tiff", f, 32, SAMPLEFORMAT_IEEEFP);
    CHECK((io::read_tiff(dir / "b.tiff") == f).all());

    const DetectorImage d = io::read_image(dir / "b.tiff", CameraModel{});
    CHECK(d.camera.width_px == 45);
    CHECK(d.camera.height_px == 30);
    write_file(dir / "x.bmp", "BM");
    CHECK_THROWS_AS(io::read_image(dir / "x.bmp"), IoError);
}

TEST_CASE("glob expansion") {
    TempDir dir;
    for (const char* n : {"f2.spnm", "f1.spnm", "f10.spnm", "other.txt"}) write_file(dir / n, "x");
    fs::create_directories(dir / "sub.spnm");
    const auto hits = io::expand_glob((dir.path / "*.spnm").string());
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].filename() == "f1.spnm");
    CHECK(hits[1].filename() == "f10.spnm");
    CHECK(hits[2].filename() == "f2.spnm");
    CHECK(io::expand_glob((dir.path / "*.none").string()).empty());
}

TEST_CASE("shortest round-trip doubles") {
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(gen) * std::pow(10.0, 40 * u(gen));
        CHECK(std::strtod(io::format_double(v).c_str(), nullptr) == v);
    }
    CHECK(io::format_double(0.1) == "0.1");
    CHECK(io::format_double(1.2e-3) == "0.0012");
}

TEST_CASE("CSV tables") {
    TempDir dir;
    io::CsvTable t;
    t.header = {"a", "b"};
    t.rows = {{1.0, 0.1}, {-2.5e-9, 3.0}};
    io::write_csv(dir / "t.csv", t);
    const std::string text = slurp(dir / "t.csv");
    CHECK(text.find('\r') == std::string::npos);
    CHECK(text.substr(0, 4) == "a,b\n");
    const io::CsvTable back = io::read_csv(dir / "t.csv");
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(back.column("b") == 1);
    CHECK_THROWS_AS(back.column("c"), IoError);

    write_file(dir / "c.csv", "# comment\nx,y\n\n1,2\n# more\n3,4\n");
    CHECK(io::read_csv(dir / "c.csv").rows.size() == 2);
    write_file(dir / "ragged.csv", "x,y\n1,2\n3\n");
    CHECK_THROWS_AS(io::read_csv(dir / "ragged.csv"), IoError);
    write_file(dir / "text.csv", "x,y\n1,abc\n");
    CHECK_THROWS_AS(io::read_csv(dir / "text.csv"), IoError);
    write_file(dir / "empty.csv", "");
    CHECK_THROWS_AS(io::read_csv(dir / "empty.csv"), IoError);
}

TEST_CASE("resonance and S11 tables") {
    TempDir dir;
    write_file(dir / "r.csv", "B0_T,freq_Hz\n0.17,4.76e9\n0.18,5.04e9\n");
    const auto pts = io::read_resonances(dir / "r.csv");
    REQUIRE(pts.size() == 2);
    CHECK(pts[1].frequency == 5.04e9);
    CHECK(pts[0].sigma == 0.0);
    write_file(dir / "rs.csv", "freq_Hz,B0_T,sigma_Hz\n4.76e9,0.17,1e6\n5.04e9,0.18,2e6\n");
    CHECK(io::read_resonances(dir / "rs.csv")[1].sigma == 2e6);
    write_file(dir / "bad_r.csv", "B,f\n1,2\n");
    CHECK_THROWS_AS(io::read_resonances(dir / "bad_r.csv"), IoError);

    write_file(dir / "s.csv", "frequency_Hz,S11_dB\n4.6e9,-3\n4.7e9,-20\n4.8e9,-3\n");
    const S11Table s = io::read_s11(dir / "s.csv");
    CHECK(s.frequency.size() == 3);
    CHECK(s.delivered(4.7e9) == doctest::Approx(0.99));
    write_file(dir / "s3.csv", "frequency_Hz,S11_dB,phase\n4.6e9,-3,0\n4.7e9,-20,0\n");
    CHECK_THROWS_AS(io::read_s11(dir / "s3.csv"), IoError);
    write_file(dir / "sd.csv", "frequency_Hz,S11_dB\n4.7e9,-3\n4.6e9,-20\n");
    CHECK_THROWS_AS(io::read_s11(dir / "sd.csv"), IoError);
}

TEST_CASE("measurement table") {
    PatternMeasurement m;
    m.tilt = 1e-4;
    m.tilt_std = 2e-5;
    m.length_px = 250.0;
    m.com = {255.5, 256.0};
    const std::vector<PatternMeasurement> ms = {m, m};
    const std::vector<double> b0 = {0.1, 0.2};
    const std::vector<double> f = {4.89e9, 4.89e9};
    const io::CsvTable t = io::measurement_table(ms, b0, f);
    CHECK(t.header == std::vector<std::string>{"index", "B0_T", "freq_Hz", "eps_rad", "eps_std", "length_px", "com_x", "com_y"});
    CHECK(t.rows[1] == std::vector<double>{1, 0.2, 4.89e9, 1e-4, 2e-5, 250.0, 255.5, 256.0});
    const std::vector<double> short_b0 = {0.1};
    CHECK_THROWS_AS(io::measurement_table(ms, short_b0, f), ConfigError);
}

TEST_CASE("SVG plot") {
    TempDir dir;
    io::write_svg_plot(dir / "p.svg", "t <1>", "x", "y", {{"a", {0, 1, 2}, {1, 0, 1}}});
    const std::string svg = slurp(dir / "p.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("t &lt;1&gt;") != std::string::npos);
}
