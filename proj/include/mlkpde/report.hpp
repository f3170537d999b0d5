#pragma once

// CSV and metadata output for study results.
//   CSV header: study,preset,param,value,error,cpu_seconds
//   numbers printed with 17 significant digits, LF line endings.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "mlkpde/diagnostics.hpp"
#include "mlkpde/errors.hpp"

namespace mlkpde {

inline constexpr const char* kCsvHeader = "study,preset,param,value,error,cpu_seconds";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string to_csv(const StudyResult& result) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& row : result.rows)
    out << result.study << ',' << result.preset << ',' << row.param << ',' << format_double(row.value) << ','
        << format_double(row.error) << ',' << format_double(row.cpu_seconds) << '\n';
  return out.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("cannot write " + path);
  out << text;
}

/// Writes <stem>.csv and <stem>.meta.json; `config` is echoed into the
/// metadata alongside the fitted quantities.
inline void write_study(const StudyResult& result, const std::string& stem, nlohmann::json config) {
  write_text(stem + ".csv", to_csv(result));
  config["fits"] = result.fits;
  config["study"] = result.study;
  write_text(stem + ".meta.json", config.dump(2) + "\n");
}

}  // namespace mlkpde
