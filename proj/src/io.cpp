#include "spinem/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include <glob.h>
#include <png.h>
#include <tiffio.h>

#include <json.hpp>

#include "spinem/errors.hpp"

namespace spinem::io {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'S', 'P', 'N', 'M', 'I', 'M', 'G', '1'};
constexpr const char* kScaleKey = "spinem.scale";

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    return in;
}

std::string lower_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

json camera_to_json(const CameraModel& c) {
    return {{"camera_length_m", c.camera_length}, {"pixel_pitch_m", c.pixel_pitch},
            {"width_px", c.width_px},             {"height_px", c.height_px},
            {"exposure_s", c.exposure},           {"beam_current_A", c.beam_current},
            {"max_counts", c.max_counts},         {"background_counts", c.background_counts}};
}

CameraModel camera_from_json(const json& j) {
    CameraModel c;
    c.camera_length = j.at("camera_length_m").get<double>();
    c.pixel_pitch = j.at("pixel_pitch_m").get<double>();
    c.width_px = j.at("width_px").get<int>();
    c.height_px = j.at("height_px").get<int>();
    c.exposure = j.at("exposure_s").get<double>();
    c.beam_current = j.at("beam_current_A").get<double>();
    c.max_counts = j.at("max_counts").get<double>();
    c.background_counts = j.at("background_counts").get<double>();
    return c;
}

json meta_to_json(const ImageMetadata& m) {
    json j = {{"b0_T", m.b0},
              {"angular_frequency_rad_s", m.angular_frequency},
              {"probe_x_m", m.probe_x},
              {"probe_y_m", m.probe_y},
              {"n_phases", m.n_phases},
              {"index", m.index},
              {"frame", m.frame},
              {"clipped_fraction", m.clipped_fraction}};
    j["seed"] = m.seed ? json(*m.seed) : json(nullptr);
    return j;
}

ImageMetadata meta_from_json(const json& j) {
    ImageMetadata m;
    m.b0 = j.at("b0_T").get<double>();
    m.angular_frequency = j.at("angular_frequency_rad_s").get<double>();
    m.probe_x = j.at("probe_x_m").get<double>();
    m.probe_y = j.at("probe_y_m").get<double>();
    m.n_phases = j.at("n_phases").get<std::int64_t>();
    m.index = j.at("index").get<std::int64_t>();
    m.frame = j.at("frame").get<std::int64_t>();
    m.clipped_fraction = j.at("clipped_fraction").get<double>();
    if (!j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
    return m;
}

struct PngWriteHandle {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteHandle() { png_destroy_write_struct(&png, &info); }
};

struct PngReadHandle {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadHandle() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
    if (mode[0] == 'w' && path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError(std::string("cannot open ") + path.string());
    return f;
}

// Rows are 8-bit RGB or 16-bit big-endian gray, as libpng expects.
void write_png(const fs::path& path, int width, int height, int bit_depth, int color_type,
               const std::vector<std::vector<png_byte>>& rows,
               const std::vector<std::pair<std::string, std::string>>& text) {
    FilePtr file = open_file(path, "wb");
    PngWriteHandle h;
    h.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!h.png) throw IoError("libpng initialization failed");
    h.info = png_create_info_struct(h.png);
    if (!h.info) throw IoError("libpng initialization failed");
    if (setjmp(png_jmpbuf(h.png))) throw IoError("PNG write failed: " + path.string());

    png_init_io(h.png, file.get());
    png_set_IHDR(h.png, h.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    std::vector<png_text> chunks(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
        chunks[i].key = const_cast<char*>(text[i].first.c_str());
        chunks[i].text = const_cast<char*>(text[i].second.c_str());
        chunks[i].text_length = text[i].second.size();
    }
    if (!chunks.empty()) png_set_text(h.png, h.info, chunks.data(), static_cast<int>(chunks.size()));
    png_write_info(h.png, h.info);
    for (const auto& row : rows) png_write_row(h.png, row.data());
    png_write_end(h.png, nullptr);
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void write_spnm(const fs::path& path, const DetectorImage& image, const std::map<std::string, double>& extra) {
    json header = {{"width", image.width()},
                   {"height", image.height()},
                   {"dtype", "float32"},
                   {"camera", camera_to_json(image.camera)},
                   {"meta", meta_to_json(image.meta)}};
    if (!extra.empty()) header["extra"] = extra;
    const std::string text = header.dump();
    const auto length = static_cast<std::uint32_t>(text.size());

    const ImageF pixels = image.pixels.cast<float>();
    std::ofstream out = open_out(path);
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&length), sizeof length);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + path.string());
}

DetectorImage read_spnm(const fs::path& path, std::map<std::string, double>* extra) {
    std::ifstream in = open_in(path);
    char magic[sizeof kMagic];
    std::uint32_t length = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&length), sizeof length);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw IoError("not a float image file: " + path.string());
    }
    std::string text(length, '\0');
    in.read(text.data(), length);
    if (!in) throw IoError("truncated header: " + path.string());

    DetectorImage image;
    int width = 0;
    int height = 0;
    try {
        const json header = json::parse(text);
        width = header.at("width").get<int>();
        height = header.at("height").get<int>();
        image.camera = camera_from_json(header.at("camera"));
        image.meta = meta_from_json(header.at("meta"));
        if (extra && header.contains("extra")) *extra = header["extra"].get<std::map<std::string, double>>();
    } catch (const json::exception& e) {
        throw IoError("bad header in " + path.string() + ": " + e.what());
    }
    if (width <= 0 || height <= 0) throw IoError("bad dimensions in " + path.string());

    ImageF pixels(height, width);
    in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size() * sizeof(float)));
    if (!in) throw IoError("truncated pixel data: " + path.string());
    image.pixels = pixels.cast<double>();
    return image;
}

double write_png16(const fs::path& path, const ImageD& pixels, std::optional<double> scale) {
    double s = scale.value_or(0.0);
    if (!scale) {
        const double peak = pixels.maxCoeff();
        s = peak > 0.0 ? peak / 65535.0 : 1.0;
    }
    if (!(s > 0.0)) throw ConfigError("PNG scale must be positive");

    std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(pixels.rows()));
    for (Eigen::Index r = 0; r < pixels.rows(); ++r) {
        auto& row = rows[static_cast<std::size_t>(r)];
        row.resize(static_cast<std::size_t>(2 * pixels.cols()));
        for (Eigen::Index c = 0; c < pixels.cols(); ++c) {
            const double level = std::clamp(std::round(pixels(r, c) / s), 0.0, 65535.0);
            const auto v = static_cast<std::uint16_t>(level);
            row[static_cast<std::size_t>(2 * c)] = static_cast<png_byte>(v >> 8);
            row[static_cast<std::size_t>(2 * c + 1)] = static_cast<png_byte>(v & 0xff);
        }
    }
    write_png(path, static_cast<int>(pixels.cols()), static_cast<int>(pixels.rows()), 16, PNG_COLOR_TYPE_GRAY,
              rows, {{kScaleKey, format_double(s)}});
    return s;
}

ImageD read_png(const fs::path& path) {
    FilePtr file = open_file(path, "rb");
    PngReadHandle h;
    h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!h.png) throw IoError("libpng initialization failed");
    h.info = png_create_info_struct(h.png);
    if (!h.info) throw IoError("libpng initialization failed");
    if (setjmp(png_jmpbuf(h.png))) throw IoError("PNG read failed: " + path.string());

    png_init_io(h.png, file.get());
    png_read_info(h.png, h.info);
    const png_uint_32 width = png_get_image_width(h.png, h.info);
    const png_uint_32 height = png_get_image_height(h.png, h.info);
    const int depth = png_get_bit_depth(h.png, h.info);
    const int color = png_get_color_type(h.png, h.info);
    if (color != PNG_COLOR_TYPE_GRAY) throw IoError("expected grayscale PNG: " + path.string());
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(h.png);
    png_read_update_info(h.png, h.info);
    const std::size_t row_bytes = png_get_rowbytes(h.png, h.info);

    double scale = 1.0;
    png_textp text = nullptr;
    int n_text = 0;
    if (png_get_text(h.png, h.info, &text, &n_text) > 0) {
        for (int i = 0; i < n_text; ++i) {
            if (std::strcmp(text[i].key, kScaleKey) == 0) scale = std::stod(text[i].text);
        }
    }

    ImageD out(height, width);
    std::vector<png_byte> row(row_bytes);
    for (png_uint_32 r = 0; r < height; ++r) {
        png_read_row(h.png, row.data(), nullptr);
        for (png_uint_32 c = 0; c < width; ++c) {
            const double v = depth == 16 ? static_cast<double>((row[2 * c] << 8) | row[2 * c + 1])
                                         : static_cast<double>(row[c]);
            out(r, c) = v * scale;
        }
    }
    return out;
}

void write_diverging_png(const fs::path& path, const ImageD& values, std::optional<double> limit) {
    double lim = limit.value_or(0.0);
    if (!limit) {
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            if (std::isfinite(values.data()[i])) lim = std::max(lim, std::abs(values.data()[i]));
        }
    }
    if (!(lim > 0.0)) lim = 1.0;

    std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(values.rows()));
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        auto& row = rows[static_cast<std::size_t>(r)];
        row.resize(static_cast<std::size_t>(3 * values.cols()));
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            std::array<double, 3> rgb = {128, 128, 128};
            const double v = values(r, c);
            if (std::isfinite(v)) {
                const double t = std::clamp(v / lim, -1.0, 1.0);
                const double fade = 255.0 * (1.0 - std::abs(t));
                rgb = t >= 0.0 ? std::array<double, 3>{255.0, fade, fade}
                               : std::array<double, 3>{fade, fade, 255.0};
            }
            for (int k = 0; k < 3; ++k) {
                row[static_cast<std::size_t>(3 * c + k)] = static_cast<png_byte>(std::lround(rgb[k]));
            }
        }
    }
    write_png(path, static_cast<int>(values.cols()), static_cast<int>(values.rows()), 8, PNG_COLOR_TYPE_RGB, rows,
              {{"spinem.limit", format_double(lim)}});
}

ImageD read_tiff(const fs::path& path) {
    TIFFSetWarningHandler(nullptr);
    std::unique_ptr<TIFF, void (*)(TIFF*)> tif(TIFFOpen(path.c_str(), "r"), [](TIFF* t) {
        if (t) TIFFClose(t);
    });
    if (!tif) throw IoError("cannot open TIFF " + path.string());

    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint16_t bits = 0;
    std::uint16_t samples = 1;
    std::uint16_t format = SAMPLEFORMAT_UINT;
    TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &width);
    TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &height);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bits);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &samples);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &format);
    if (samples != 1) throw IoError("expected single-channel TIFF: " + path.string());
    const bool ok_int = format == SAMPLEFORMAT_UINT && (bits == 8 || bits == 16 || bits == 32);
    const bool ok_float = format == SAMPLEFORMAT_IEEEFP && bits == 32;
    if (!ok_int && !ok_float) throw IoError("unsupported TIFF sample type: " + path.string());

    ImageD out(height, width);
    std::vector<unsigned char> line(static_cast<std::size_t>(TIFFScanlineSize(tif.get())));
    for (std::uint32_t r = 0; r < height; ++r) {
        if (TIFFReadScanline(tif.get(), line.data(), r) < 0) throw IoError("TIFF read failed: " + path.string());
        for (std::uint32_t c = 0; c < width; ++c) {
            double v = 0.0;
            if (ok_float) {
                float f;
                std::memcpy(&f, line.data() + 4 * c, 4);
                v = f;
            } else if (bits == 8) {
                v = line[c];
            } else if (bits == 16) {
                std::uint16_t u;
                std::memcpy(&u, line.data() + 2 * c, 2);
                v = u;
            } else {
                std::uint32_t u;
                std::memcpy(&u, line.data() + 4 * c, 4);
                v = u;
            }
            out(r, c) = v;
        }
    }
    return out;
}

DetectorImage read_image(const fs::path& path, const CameraModel& camera) {
    const std::string ext = lower_extension(path);
    if (ext == ".spnm") return read_spnm(path);
    DetectorImage image;
    if (ext == ".png") {
        image.pixels = read_png(path);
    } else if (ext == ".tif" || ext == ".tiff") {
        image.pixels = read_tiff(path);
    } else {
        throw IoError("unknown image format: " + path.string());
    }
    image.camera = camera;
    image.camera.width_px = image.width();
    image.camera.height_px = image.height();
    return image;
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
    glob_t result{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &result);
    std::vector<fs::path> out;
    if (rc == 0) {
        for (std::size_t i = 0; i < result.gl_pathc; ++i) {
            if (fs::is_regular_file(result.gl_pathv[i])) out.emplace_back(result.gl_pathv[i]);
        }
    }
    globfree(&result);
    if (rc != 0 && rc != GLOB_NOMATCH) throw IoError("glob failed: " + pattern);
    return out;
}

std::string format_double(double value) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, result.ptr);
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IoError("CSV is missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in = open_in(path);
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty() || line[0] == '#') continue;
        std::vector<std::string> fields = split_fields(line);
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(table.header.size()) + " columns, found " + std::to_string(fields.size()));
        }
        std::vector<double> row;
        for (const std::string& f : fields) {
            char* end = nullptr;
            const double v = std::strtod(f.c_str(), &end);
            if (f.empty() || *end != '\0') {
                throw IoError(path.string() + ":" + std::to_string(line_no) + ": not a number: '" + f + "'");
            }
            row.push_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw IoError("empty CSV: " + path.string());
    return table;
}

void write_csv(const fs::path& path, const CsvTable& table) {
    std::string text;
    for (std::size_t i = 0; i < table.header.size(); ++i) text += (i ? "," : "") + table.header[i];
    text += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) text += (i ? "," : "") + format_double(row[i]);
        text += '\n';
    }
    write_text(path, text);
}

CsvTable measurement_table(std::span<const PatternMeasurement> measurements, std::span<const double> b0,
                           std::span<const double> frequency) {
    if (b0.size() != measurements.size() || frequency.size() != measurements.size()) {
        throw ConfigError("measurement table: column lengths differ");
    }
    CsvTable t;
    t.header = {"index", "B0_T", "freq_Hz", "eps_rad", "eps_std", "length_px", "com_x", "com_y"};
    for (std::size_t i = 0; i < measurements.size(); ++i) {
        const PatternMeasurement& m = measurements[i];
        t.rows.push_back({static_cast<double>(i), b0[i], frequency[i], m.tilt, m.tilt_std, m.length_px, m.com.x(),
                          m.com.y()});
    }
    return t;
}

std::vector<GyromagneticPoint> read_resonances(const fs::path& path) {
    const CsvTable t = read_csv(path);
    const std::size_t b = t.column("B0_T");
    const std::size_t f = t.column("freq_Hz");
    const auto sigma = std::find(t.header.begin(), t.header.end(), "sigma_Hz");
    std::vector<GyromagneticPoint> out;
    for (const auto& row : t.rows) {
        GyromagneticPoint p{row[b], row[f], 0.0};
        if (sigma != t.header.end()) p.sigma = row[static_cast<std::size_t>(sigma - t.header.begin())];
        out.push_back(p);
    }
    return out;
}

S11Table read_s11(const fs::path& path) {
    const CsvTable t = read_csv(path);
    if (t.header.size() != 2) {
        throw IoError(path.string() + ": S11 table needs exactly two columns (frequency_Hz, S11_dB)");
    }
    S11Table s;
    for (const auto& row : t.rows) {
        if (!s.frequency.empty() && !(row[0] > s.frequency.back())) {
            throw IoError(path.string() + ": S11 frequencies must be strictly ascending");
        }
        s.frequency.push_back(row[0]);
        s.s11_db.push_back(row[1]);
    }
    return s;
}

void write_svg_plot(const fs::path& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<PlotSeries>& series) {
    constexpr double kW = 720, kH = 440, kLeft = 90, kRight = 20, kTop = 40, kBottom = 60;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const PlotSeries& s : series) {
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); };
    auto py = [&](double y) { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
        << "</text>\n"
        << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kW - kLeft - kRight << "\" height=\""
        << kH - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0;
        const double yv = y0 + (y1 - y0) * k / 4.0;
        svg << "<text x=\"" << px(xv) << "\" y=\"" << kH - kBottom + 18 << "\" text-anchor=\"middle\">"
            << format_double(static_cast<float>(xv)) << "</text>\n"
            << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
            << format_double(static_cast<float>(yv)) << "</text>\n";
    }
    svg << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">" << xml_escape(x_label)
        << "</text>\n"
        << "<text transform=\"translate(18," << kH / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << xml_escape(y_label) << "</text>\n";
    double legend_y = kTop + 16;
    for (const PlotSeries& s : series) {
        std::ostringstream points;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) points << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        }
        if (s.markers) {
            for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                svg << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"2\" fill=\"" << s.color
                    << "\"/>\n";
            }
        } else {
            svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\""
                << points.str() << "\"/>\n";
        }
        svg << "<text x=\"" << kW - kRight - 8 << "\" y=\"" << legend_y << "\" text-anchor=\"end\" fill=\"" << s.color
            << "\">" << xml_escape(s.label) << "</text>\n";
        legend_y += 16;
    }
    svg << "</svg>\n";
    write_text(path, svg.str());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out = open_out(path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace spinem::io
