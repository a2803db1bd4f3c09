#include "deog/recording.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace deog {

namespace {

std::string meta_path_for(const std::string& csv_path) {
  const auto dot = csv_path.rfind(".csv");
  if (dot != std::string::npos && dot == csv_path.size() - 4)
    return csv_path.substr(0, dot) + ".meta";
  return csv_path + ".meta";
}

std::string role_for_label(const std::string& label) {
  if (label == "VEOG" || label == "veog") return "veog";
  if (label == "HEOG" || label == "heog") return "heog";
  return "eeg";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{})
    throw std::runtime_error("read_recording_csv: bad number on line " +
                             std::to_string(line_no));
  return v;
}

}  // namespace

std::size_t Recording::channel_index(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return i;
  throw std::runtime_error("Recording: unknown channel '" + label + "'");
}

void write_recording_csv(const std::string& path, const Recording& rec) {
  if (rec.data.rows != rec.labels.size())
    throw std::runtime_error("write_recording_csv: label count mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_recording_csv: cannot open " + path);

  f << "time";
  for (const auto& l : rec.labels) f << ',' << l;
  f << '\n';

  char buf[40];
  const double dt = rec.fs_hz > 0.0 ? 1.0 / rec.fs_hz : 1.0;
  for (std::size_t j = 0; j < rec.n_samples(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(j) * dt);
    f << buf;
    for (std::size_t i = 0; i < rec.n_channels(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", rec.data(i, j));
      f << ',' << buf;
    }
    f << '\n';
  }
  if (!f) throw std::runtime_error("write_recording_csv: write failed for " + path);

  std::ofstream meta(meta_path_for(path), std::ios::binary);
  if (!meta) throw std::runtime_error("write_recording_csv: cannot open sidecar");
  char fsbuf[40];
  std::snprintf(fsbuf, sizeof(fsbuf), "%.17g", rec.fs_hz);
  meta << "fs=" << fsbuf << '\n';
  meta << "subject=" << rec.subject << '\n';
  meta << "roles=";
  for (std::size_t i = 0; i < rec.labels.size(); ++i) {
    if (i) meta << ',';
    meta << role_for_label(rec.labels[i]);
  }
  meta << '\n';
}

Recording read_recording_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_recording_csv: cannot open " + path);

  std::string line;
  if (!std::getline(f, line))
    throw std::runtime_error("read_recording_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "time")
    throw std::runtime_error("read_recording_csv: bad header on line 1");

  Recording rec;
  rec.labels.assign(header.begin() + 1, header.end());
  const std::size_t n_ch = rec.labels.size();

  std::vector<std::vector<double>> columns(n_ch);
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != n_ch + 1)
      throw std::runtime_error("read_recording_csv: wrong column count on line " +
                               std::to_string(line_no));
    for (std::size_t i = 0; i < n_ch; ++i)
      columns[i].push_back(parse_double(cells[i + 1], line_no));
  }
  const std::size_t t = columns.empty() ? 0 : columns[0].size();
  rec.data = RealMatrix(n_ch, t);
  for (std::size_t i = 0; i < n_ch; ++i)
    for (std::size_t j = 0; j < t; ++j) rec.data(i, j) = columns[i][j];

  std::ifstream meta(meta_path_for(path), std::ios::binary);
  if (meta) {
    while (std::getline(meta, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq);
      const std::string val = line.substr(eq + 1);
      if (key == "fs") rec.fs_hz = std::strtod(val.c_str(), nullptr);
      else if (key == "subject") rec.subject = val;
    }
  }
  return rec;
}

}  // namespace deog
