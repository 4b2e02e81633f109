#pragma once

// SphereSignal files and the subject manifest.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "scnn/cortex.hpp"

namespace scnn {

inline constexpr std::uint32_t sphere_signal_version = 1;

// "SPHS", u32 version, u8 hemisphere, u32 channels, u32 bandwidth, f64 values
// in (channel, beta, alpha) order.
inline std::string serialize_sphere_signal(const SphereSignal& f, Hemisphere h) {
  std::string out = "SPHS";
  detail::put<std::uint32_t>(out, sphere_signal_version);
  detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(h));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.channels));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.bandwidth));
  for (double v : f.values) detail::put<double>(out, v);
  return out;
}

struct LoadedSignal {
  SphereSignal signal;
  Hemisphere hemisphere = Hemisphere::left;
};

inline LoadedSignal parse_sphere_signal(const std::string& bytes) {
  detail::Reader r(bytes);
  r.expect_magic("SPHS");
  std::size_t at = r.pos();
  if (auto v = r.get<std::uint32_t>("version"); v != sphere_signal_version)
    throw ParseError("unsupported signal version " + std::to_string(v), at);
  at = r.pos();
  auto h = r.get<std::uint8_t>("hemisphere");
  if (h > 1) throw ParseError("hemisphere byte must be 0 or 1", at);
  at = r.pos();
  const auto c = r.get<std::uint32_t>("channels");
  const auto b = r.get<std::uint32_t>("bandwidth");
  if (c == 0 || b == 0 || b > 4096) throw ParseError("bad signal shape", at);
  LoadedSignal out{SphereSignal(static_cast<int>(c), static_cast<int>(b)), static_cast<Hemisphere>(h)};
  at = r.pos();
  if (bytes.size() - at != out.signal.values.size() * 8)
    throw ParseError("value block holds " + std::to_string((bytes.size() - at) / 8) + " values, expected " +
                         std::to_string(out.signal.values.size()),
                     at);
  for (double& v : out.signal.values) v = r.get<double>("values");
  out.signal.validate();
  return out;
}

inline void save_sphere_signal(const SphereSignal& f, Hemisphere h, const std::string& path) {
  detail::write_file(path, serialize_sphere_signal(f, h));
}

inline LoadedSignal load_sphere_signal(const std::string& path) { return parse_sphere_signal(detail::read_file(path)); }

enum class Diagnosis { CN = 0, MCI_s = 1, MCI_p = 2, AD = 3 };

inline constexpr Diagnosis all_diagnoses[] = {Diagnosis::CN, Diagnosis::MCI_s, Diagnosis::MCI_p, Diagnosis::AD};

inline std::string to_string(Diagnosis d) {
  switch (d) {
    case Diagnosis::CN: return "CN";
    case Diagnosis::MCI_s: return "MCI-s";
    case Diagnosis::MCI_p: return "MCI-p";
    case Diagnosis::AD: return "AD";
  }
  return "?";
}

inline Diagnosis parse_diagnosis(const std::string& s) {
  for (auto d : all_diagnoses)
    if (to_string(d) == s) return d;
  throw ValidationError("unknown diagnosis '" + s + "'");
}

struct SubjectRecord {
  std::string id;
  Diagnosis label = Diagnosis::CN;
  double age = 0.0;
  char gender = 'M';  // 'M' or 'F'
  std::string left_path, right_path;
  int fold = -1;  // -1 when unassigned
};

inline std::string manifest_csv(const std::vector<SubjectRecord>& rows) {
  std::string out = "subject_id,label,age,gender,left_path,right_path,fold\n";
  char age[64];
  for (const auto& r : rows) {
    std::snprintf(age, sizeof age, "%.17g", r.age);
    out += r.id + "," + to_string(r.label) + "," + age + "," + std::string(1, r.gender) + "," + r.left_path + "," + r.right_path + "," +
           (r.fold < 0 ? std::string() : std::to_string(r.fold)) + "\n";
  }
  return out;
}

inline void save_manifest(const std::vector<SubjectRecord>& rows, const std::string& path) {
  detail::write_file(path, manifest_csv(rows));
}

inline std::vector<SubjectRecord> parse_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line) || line != "subject_id,label,age,gender,left_path,right_path,fold")
    throw ParseError("manifest header must be subject_id,label,age,gender,left_path,right_path,fold", 0);
  offset += line.size() + 1;
  std::vector<SubjectRecord> rows;
  while (std::getline(in, line)) {
    const std::size_t at = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 7) throw ParseError("manifest row needs 7 fields, found " + std::to_string(f.size()), at);
    SubjectRecord r;
    r.id = f[0];
    r.label = parse_diagnosis(f[1]);
    try {
      r.age = std::stod(f[2]);
      r.fold = f[6].empty() ? -1 : std::stoi(f[6]);
    } catch (const std::logic_error&) {
      throw ParseError("non-numeric age or fold", at);
    }
    if (!(r.age > 0.0)) throw ValidationError("subject " + r.id + ": age must be positive");
    if (f[3] != "M" && f[3] != "F") throw ValidationError("subject " + r.id + ": gender must be M or F");
    r.gender = f[3][0];
    r.left_path = f[4];
    r.right_path = f[5];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<SubjectRecord> load_manifest(const std::string& path) { return parse_manifest(detail::read_file(path)); }

}  // namespace scnn
