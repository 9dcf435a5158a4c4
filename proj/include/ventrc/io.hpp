#pragma once

// Plain-text persistence:
//   coefficient files   one header line of key=value pairs, then one
//                       coefficient per line
//   FRF CSV             frequency_hz,real,imag

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ventrc/errors.hpp"
#include "ventrc/lti.hpp"

namespace ventrc::io {

namespace fs = std::filesystem;

/// Shortest text that round-trips a double.
inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

inline std::ofstream open_for_write(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

inline double parse_double(const std::string& text, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (trim(text.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigurationError(context + ": not a number: '" + text + "'");
}

inline int parse_int(const std::string& text, const std::string& context) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (trim(text.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigurationError(context + ": not an integer: '" + text + "'");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

using Header = std::map<std::string, std::string>;

inline Header parse_header(const std::string& line, const std::string& context) {
  Header h;
  std::istringstream is(line);
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigurationError(context + ": malformed header token '" + token + "'");
    h[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return h;
}

inline const std::string& header_value(const Header& h, const std::string& key, const std::string& context) {
  const auto it = h.find(key);
  if (it == h.end()) throw ConfigurationError(context + ": header lacks '" + key + "'");
  return it->second;
}

inline std::vector<double> parse_coefficients(const std::vector<std::string>& lines, std::size_t first,
                                              std::size_t count, const std::string& context) {
  if (lines.size() < first + count) throw ConfigurationError(context + ": truncated coefficient list");
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(parse_double(trim(lines[first + i]), context));
  return out;
}

inline void write_coefficients(const fs::path& path, const TransferFunction& tf) {
  auto out = open_for_write(path);
  out << "sample_time=" << tf.sample_time() << " pure_delay=" << tf.pure_delay()
      << " numerator=" << tf.numerator().size() << " denominator=" << tf.denominator().size() << '\n';
  for (double c : tf.numerator()) out << c << '\n';
  for (double c : tf.denominator()) out << c << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline TransferFunction read_transfer_function(const fs::path& path) {
  const auto lines = read_lines(path);
  const std::string ctx = path.string();
  if (lines.empty()) throw ConfigurationError(ctx + ": empty coefficient file");
  const auto h = parse_header(lines[0], ctx);
  const double ts = parse_double(header_value(h, "sample_time", ctx), ctx);
  const int delay = parse_int(header_value(h, "pure_delay", ctx), ctx);
  const int nn = parse_int(header_value(h, "numerator", ctx), ctx);
  const int nd = parse_int(header_value(h, "denominator", ctx), ctx);
  if (nn < 1 || nd < 1) throw ConfigurationError(ctx + ": coefficient counts must be positive");
  auto num = parse_coefficients(lines, 1, static_cast<std::size_t>(nn), ctx);
  auto den = parse_coefficients(lines, 1 + static_cast<std::size_t>(nn), static_cast<std::size_t>(nd), ctx);
  return {std::move(num), std::move(den), delay, ts};
}

inline void write_coefficients(const fs::path& path, const FirKernel& kernel, double sample_time) {
  auto out = open_for_write(path);
  out << "sample_time=" << sample_time << " forward_shift=" << kernel.forward_shift()
      << " taps=" << kernel.taps().size() << " zero_phase=" << (kernel.zero_phase() ? 1 : 0) << '\n';
  for (double c : kernel.taps()) out << c << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline FirKernel read_fir_kernel(const fs::path& path) {
  const auto lines = read_lines(path);
  const std::string ctx = path.string();
  if (lines.empty()) throw ConfigurationError(ctx + ": empty coefficient file");
  const auto h = parse_header(lines[0], ctx);
  const int shift = parse_int(header_value(h, "forward_shift", ctx), ctx);
  const int count = parse_int(header_value(h, "taps", ctx), ctx);
  const bool zero_phase = h.contains("zero_phase") && parse_int(h.at("zero_phase"), ctx) != 0;
  if (count < 1) throw ConfigurationError(ctx + ": tap count must be positive");
  return {parse_coefficients(lines, 1, static_cast<std::size_t>(count), ctx), shift, zero_phase};
}

// FRF CSV. The sample time is carried in a leading comment line so the
// file is self-describing; readers also accept files without it when a
// sample time is supplied.
inline void write_frf_csv(const fs::path& path, const FrequencyResponse& frf) {
  auto out = open_for_write(path);
  out << "# sample_time=" << frf.sample_time() << '\n';
  out << "frequency_hz,real,imag\n";
  for (std::size_t i = 0; i < frf.size(); ++i)
    out << frf.frequencies_hz()[i] << ',' << frf.values()[i].real() << ',' << frf.values()[i].imag() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline FrequencyResponse read_frf_csv(const fs::path& path, std::optional<double> sample_time = std::nullopt) {
  const auto lines = read_lines(path);
  const std::string ctx = path.string();
  std::optional<double> ts = sample_time;
  std::vector<double> f;
  std::vector<Complex> v;
  bool header_seen = false;
  for (const auto& raw : lines) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto h = parse_header(trim(line.substr(1)), ctx);
      if (h.contains("sample_time") && !sample_time) ts = parse_double(h.at("sample_time"), ctx);
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("frequency_hz", 0) == 0) continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 3) throw ConfigurationError(ctx + ": expected 3 columns in '" + line + "'");
    f.push_back(parse_double(cells[0], ctx));
    v.emplace_back(parse_double(cells[1], ctx), parse_double(cells[2], ctx));
  }
  if (!ts) throw ConfigurationError(ctx + ": sample time unknown (no '# sample_time=' line)");
  return {std::move(f), std::move(v), *ts};
}

}  // namespace ventrc::io
