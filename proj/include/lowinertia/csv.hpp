#pragma once

// CSV emission for traces, metrics, sweeps, and reduced-model studies.
//
// The files are meant as a stable machine-readable contract: comma separator,
// decimal point, LF line endings, floats printed with 9 significant digits.
// Two runs of the same scenario produce byte-identical files.

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "reduced.hpp"
#include "solver.hpp"
#include "system.hpp"

namespace lowinertia {

[[nodiscard]] inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
  if (!out) throw std::runtime_error("csv: cannot open '" + path + "' for writing");
  return out;
}

inline void finish_csv(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw std::runtime_error("csv: write to '" + path + "' failed");
}

// Channel units: everything the simulator records is per-unit except the time
// axis and the ac-limiter engagement flag.
inline std::string channel_header(const std::string& name) {
  if (name.size() >= 6 && name.compare(name.size() - 6, 6, ".aclim") == 0)
    return name + " (bool)";
  return name + " (pu)";
}

}  // namespace detail

// Write selected channels of a trace, time first. An empty selection writes
// the header row alone. Unknown channel names are an error.
inline void write_trace_csv(const Trace& trace, const std::vector<std::string>& selection,
                            const std::string& path) {
  std::vector<int> cols;
  cols.reserve(selection.size());
  for (const auto& want : selection) {
    int found = -1;
    for (std::size_t c = 0; c < trace.channel_names.size(); ++c)
      if (trace.channel_names[c] == want) {
        found = static_cast<int>(c);
        break;
      }
    if (found < 0) throw std::invalid_argument("csv: unknown channel '" + want + "'");
    cols.push_back(found);
  }

  auto out = detail::open_csv(path);
  out << "time (s)";
  for (int c : cols) out << ',' << detail::channel_header(trace.channel_names[c]);
  out << '\n';
  if (!cols.empty()) {
    for (std::size_t i = 0; i < trace.time.size(); ++i) {
      out << csv_number(trace.time[i]);
      for (int c : cols) out << ',' << csv_number(trace.values[c][i]);
      out << '\n';
    }
  }
  detail::finish_csv(out, path);
}

inline void write_metrics_csv(const MetricsResult& m, const std::string& path) {
  auto out = detail::open_csv(path);
  out << "nadir (pu),rocof (pu/s),normalized_nadir,normalized_rocof,classification\n";
  out << csv_number(m.nadir) << ',' << csv_number(m.rocof) << ',' << csv_number(m.normalized_nadir)
      << ',' << csv_number(m.normalized_rocof) << ',' << to_string(m.stable) << '\n';
  detail::finish_csv(out, path);
}

inline void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path) {
  auto out = detail::open_csv(path);
  out << "delta_p (pu),nadir (pu),rocof (pu/s),normalized_nadir,normalized_rocof,classification\n";
  for (const auto& pt : points) {
    out << csv_number(pt.dp) << ',' << csv_number(pt.metrics.nadir) << ','
        << csv_number(pt.metrics.rocof) << ',' << csv_number(pt.metrics.normalized_nadir) << ','
        << csv_number(pt.metrics.normalized_rocof) << ',' << to_string(pt.metrics.stable) << '\n';
  }
  detail::finish_csv(out, path);
}

inline void write_interpolation_csv(const std::vector<InterpolationPoint>& points,
                                    const std::string& path) {
  auto out = detail::open_csv(path);
  out << "nu,rocof (% of anchor),nadir (% of anchor)\n";
  for (const auto& pt : points)
    out << csv_number(pt.nu) << ',' << csv_number(pt.rocof_pct) << ',' << csv_number(pt.nadir_pct)
        << '\n';
  detail::finish_csv(out, path);
}

}  // namespace lowinertia
