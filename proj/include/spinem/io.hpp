#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spinem/analysis.hpp"
#include "spinem/fit.hpp"
#include "spinem/image.hpp"
#include "spinem/spectro.hpp"

namespace spinem::io {

namespace fs = std::filesystem;

/// Float image container: "SPNMIMG1", uint32 LE header length, JSON header
/// (dimensions, camera, metadata), then row-major float32 LE pixels.
/// `extra` holds free-form numeric annotations (map detuning, grid extent).
void write_spnm(const fs::path& path, const DetectorImage& image, const std::map<std::string, double>& extra = {});
DetectorImage read_spnm(const fs::path& path, std::map<std::string, double>* extra = nullptr);

/// 16-bit grayscale PNG, counts = value · scale. The scale goes into a tEXt
/// chunk; when omitted it maps the image maximum to 65535. Returns the scale.
double write_png16(const fs::path& path, const ImageD& pixels, std::optional<double> scale = {});
/// Reads 8- or 16-bit grayscale PNG, applying a stored scale if present.
ImageD read_png(const fs::path& path);

/// Blue-white-red RGB PNG, symmetric about zero. NaN pixels are drawn gray.
void write_diverging_png(const fs::path& path, const ImageD& values, std::optional<double> limit = {});

/// Single-channel 8/16/32-bit integer or 32-bit float TIFF, first page.
ImageD read_tiff(const fs::path& path);

/// Dispatches on extension (.spnm, .png, .tif, .tiff). Raw PNG/TIFF frames
/// get `camera` as their geometry.
DetectorImage read_image(const fs::path& path, const CameraModel& camera = {});

/// Regular files matching a shell glob, sorted.
std::vector<fs::path> expand_glob(const std::string& pattern);

/// Shortest text that parses back to the same double.
std::string format_double(double value);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Index of a named column; throws IoError when absent.
    std::size_t column(const std::string& name) const;
};

/// Comma-separated numeric table with a header row. Every row must have as
/// many fields as the header.
CsvTable read_csv(const fs::path& path);
void write_csv(const fs::path& path, const CsvTable& table);

/// Columns index, B0_T, freq_Hz, eps_rad, eps_std, length_px, com_x, com_y.
CsvTable measurement_table(std::span<const PatternMeasurement> measurements,
                           std::span<const double> b0, std::span<const double> frequency);

/// Resonance pairs from columns B0_T and freq_Hz, optional sigma_Hz.
std::vector<GyromagneticPoint> read_resonances(const fs::path& path);

/// Two-column VNA export: frequency_Hz, S11_dB.
S11Table read_s11(const fs::path& path);

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    bool markers = false;
};

/// Minimal line/scatter plot.
void write_svg_plot(const fs::path& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<PlotSeries>& series);

void write_text(const fs::path& path, const std::string& text);

}  // namespace spinem::io
