#include "lbo/io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lbo::io {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

constexpr double kDefaultRateHz = 2000.0;

std::vector<double> read_f64(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open series file: " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes % sizeof(double) != 0)
    throw ParseError("f64 series file size not a multiple of 8: " + path.string());
  std::vector<double> out(bytes / sizeof(double));
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("short read on series file: " + path.string());
  if constexpr (std::endian::native == std::endian::big) {
    for (double& d : out) {
      std::uint64_t u;
      std::memcpy(&u, &d, 8);
      u = __builtin_bswap64(u);
      std::memcpy(&d, &u, 8);
    }
  }
  return out;
}

std::vector<double> read_csv_column(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open series file: " + path.string());
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v = 0.0;
    const auto res = std::from_chars(line.data(), line.data() + line.size(), v);
    if (res.ec != std::errc{} || res.ptr != line.data() + line.size())
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad sample '" + line + "'");
    out.push_back(v);
  }
  return out;
}

Label parse_label(const std::string& s, const std::filesystem::path& ctx) {
  if (s == "healthy" || s == "Healthy") return Label::Healthy;
  if (s == "unhealthy" || s == "Unhealthy") return Label::Unhealthy;
  throw ParseError("bad label '" + s + "' in " + ctx.string());
}

}  // namespace

TimeSeries read_series(const std::filesystem::path& path, double sample_rate_hz) {
  std::vector<double> samples =
      path.extension() == ".f64" ? read_f64(path) : read_csv_column(path);
  return TimeSeries::make(std::move(samples), sample_rate_hz);
}

void write_series(const std::filesystem::path& path, const TimeSeries& series) {
  if (path.extension() == ".f64") {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write series file: " + path.string());
    if constexpr (std::endian::native == std::endian::big) {
      for (double d : series.samples) {
        std::uint64_t u;
        std::memcpy(&u, &d, 8);
        u = __builtin_bswap64(u);
        out.write(reinterpret_cast<const char*>(&u), 8);
      }
    } else {
      out.write(reinterpret_cast<const char*>(series.samples.data()),
                static_cast<std::streamsize>(series.samples.size() * sizeof(double)));
    }
    if (!out) throw IoError("short write on series file: " + path.string());
    return;
  }
  std::ostringstream os;
  for (double v : series.samples) os << format_double(v) << '\n';
  write_text_file(path, os.str());
}

Protocol read_protocol(const std::filesystem::path& manifest_path) {
  json j;
  try {
    j = json::parse(read_text_file(manifest_path));
  } catch (const json::exception& e) {
    throw ParseError("manifest " + manifest_path.string() + ": " + e.what());
  }
  try {
    Protocol p;
    p.name = j.at("name").get<std::string>();
    p.air_flow_slpm = j.at("air_flow_slpm").get<double>();
    p.transition_ratio = j.at("transition_ratio").get<double>();
    const double rate = j.value("sample_rate_hz", kDefaultRateHz);
    const auto base = manifest_path.parent_path();
    for (const auto& rj : j.at("records")) {
      QuasiStaticRecord rec;
      rec.phi_ratio = rj.at("phi_ratio").get<double>();
      rec.series = read_series(base / rj.at("path").get<std::string>(), rate);
      if (rj.contains("label"))
        rec.label = parse_label(rj.at("label").get<std::string>(), manifest_path);
      p.records.push_back(std::move(rec));
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw ParseError("manifest " + manifest_path.string() + ": " + e.what());
  }
}

void write_protocol(const std::filesystem::path& manifest_path, const Protocol& protocol,
                    const std::string& series_extension) {
  protocol.validate();
  const auto dir = manifest_path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);

  json records = json::array();
  for (std::size_t i = 0; i < protocol.records.size(); ++i) {
    const auto& rec = protocol.records[i];
    char name[64];
    std::snprintf(name, sizeof(name), "r%02zu_phi%.3f%s", i, rec.phi_ratio,
                  series_extension.c_str());
    write_series(dir / name, rec.series);
    json rj{{"phi_ratio", rec.phi_ratio}, {"path", std::string(name)}};
    if (rec.label) rj["label"] = *rec.label == Label::Healthy ? "healthy" : "unhealthy";
    records.push_back(std::move(rj));
  }
  const json j{{"name", protocol.name},
               {"air_flow_slpm", protocol.air_flow_slpm},
               {"transition_ratio", protocol.transition_ratio},
               {"sample_rate_hz", protocol.records.front().series.sample_rate_hz},
               {"records", records}};
  write_text_file(manifest_path, j.dump(2) + "\n");
}

void write_curve_csv(const std::filesystem::path& path,
                     std::span<const std::pair<double, double>> points) {
  std::ostringstream os;
  os << "phi_ratio,value\n";
  for (const auto& [phi, value] : points)
    os << format_double(phi) << ',' << format_double(value) << '\n';
  write_text_file(path, os.str());
}

void write_csv(const std::filesystem::path& path, const std::string& header,
               std::span<const std::vector<std::string>> rows) {
  std::ostringstream os;
  os << header << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << row[i];
    }
    os << '\n';
  }
  write_text_file(path, os.str());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("short write on file: " + path.string());
}

}  // namespace lbo::io
