#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lbo/series.hpp"

namespace lbo::io {

/// Shortest round-trip decimal formatting for doubles. Used everywhere a
/// number is written to CSV so that reruns are byte-identical and parsing
/// recovers the exact double.
std::string format_double(double v);

/// Read a series file. ".f64" files hold raw little-endian 64-bit floats,
/// anything else is parsed as single-column CSV (one sample per line, no
/// header). The sampling rate is not stored in series files; the caller
/// supplies it (manifests carry it).
TimeSeries read_series(const std::filesystem::path& path, double sample_rate_hz);

/// Write a series file; format chosen by extension as in read_series.
void write_series(const std::filesystem::path& path, const TimeSeries& series);

/// Protocol manifest JSON:
///   {"name", "air_flow_slpm", "transition_ratio",
///    "records": [{"phi_ratio", "path", "label"?}, ...]}
/// with series paths relative to the manifest file. A "sample_rate_hz" key
/// is written and honored when present; absent, rate defaults to 2000 Hz.
Protocol read_protocol(const std::filesystem::path& manifest_path);
void write_protocol(const std::filesystem::path& manifest_path, const Protocol& protocol,
                    const std::string& series_extension = ".f64");

/// Two-column curve CSV: header "phi_ratio,value".
void write_curve_csv(const std::filesystem::path& path,
                     std::span<const std::pair<double, double>> points);

/// Generic CSV writer: one header row then data rows, all cells preformatted.
void write_csv(const std::filesystem::path& path, const std::string& header,
               std::span<const std::vector<std::string>> rows);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace lbo::io
