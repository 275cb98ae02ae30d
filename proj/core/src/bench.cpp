#include "lbo/bench.hpp"

#include <algorithm>
#include <chrono>

#include "lbo/io.hpp"

namespace lbo::bench {

namespace {

// Keep the detector result observable so the timed call cannot be elided.
volatile double g_sink = 0.0;

}  // namespace

TimingStats time_detector(const DetectorFn& detector, const QuasiStaticRecord& record,
                          int repeats) {
  if (repeats < 3) throw ConfigInvalidError("time_detector: repeats must be >= 3");
  using clock = std::chrono::steady_clock;

  g_sink = detector(record);  // warm-up, untimed

  TimingStats stats;
  stats.per_repeat.reserve(static_cast<std::size_t>(repeats));
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = clock::now();
    g_sink = detector(record);
    const auto t1 = clock::now();
    stats.per_repeat.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::vector<double> sorted = stats.per_repeat;
  std::sort(sorted.begin(), sorted.end());
  stats.min_s = sorted.front();
  stats.max_s = sorted.back();
  const std::size_t n = sorted.size();
  stats.median_s = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return stats;
}

std::vector<BenchRow> bench_suite(std::span<const NamedDetector> detectors,
                                  std::span<const Protocol> protocols, int repeats) {
  std::vector<BenchRow> rows;
  for (const auto& detector : detectors) {
    for (const auto& protocol : protocols) {
      for (const auto& record : protocol.records) {
        BenchRow row;
        row.detector = detector.name;
        row.protocol = protocol.name;
        row.phi_ratio = record.phi_ratio;
        row.stats = time_detector(detector.fn, record, repeats);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

void write_timings_csv(const std::filesystem::path& path, std::span<const BenchRow> rows) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  for (const auto& row : rows)
    cells.push_back({row.detector, row.protocol, io::format_double(row.phi_ratio),
                     io::format_double(row.stats.median_s)});
  io::write_csv(path, "detector,protocol,phi_ratio,median_s", cells);
}

}  // namespace lbo::bench
