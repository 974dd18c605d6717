#pragma once

// On-disk formats: manifest CSV and sidecar, noise index JSON, speech pair
// lists.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mixkit/curation.hpp"
#include "mixkit/error.hpp"
#include "mixkit/mixing.hpp"
#include "mixkit/rng.hpp"
#include "mixkit/version.hpp"

namespace mixkit {

inline const char* const kManifestHeader =
    "mixture_id,s1_path,s2_path,rel_level_db,speaker_gain_db,noise_path,noise_offset_s,noise_snr_db,pad_before_s,"
    "pad_after_s,mode,sample_rate_hz";

/// Six decimals, '.' radix, no negative zero.
inline std::string format_fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == '"') throw IoError("CSV quoting is not supported: " + line);
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

inline void check_csv_field(const std::string& f) {
  if (f.find_first_of(",\n\r\"") != std::string::npos) throw InvalidArgument("value not representable in CSV: " + f);
}

inline double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw IoError("cannot parse " + what + ": '" + s + "'");
  return v;
}

inline std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path,
                                                          std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV: " + path.string());
  header = split_csv_line(line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto r = split_csv_line(line);
    if (r.size() != header.size()) throw IoError(path.string() + ": row has " + std::to_string(r.size()) + " fields, header has " + std::to_string(header.size()));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::size_t column(const std::vector<std::string>& header, const std::string& name, const std::string& file) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw IoError(file + ": missing column " + name);
}

inline std::string manifest_csv(const std::vector<MixtureSpec>& rows) {
  std::string out = std::string(kManifestHeader) + "\n";
  for (const auto& r : rows) {
    for (const auto* f : {&r.mixture_id, &r.s1_path, &r.s2_path, &r.noise_path}) check_csv_field(*f);
    out += r.mixture_id + ',' + r.s1_path + ',' + r.s2_path + ',' + format_fixed6(r.rel_level_db) + ',' +
           format_fixed6(r.speaker_gain_db) + ',' + r.noise_path + ',' + format_fixed6(r.noise_offset_s) + ',' +
           format_fixed6(r.noise_snr_db) + ',' + format_fixed6(r.pad_before_s) + ',' + format_fixed6(r.pad_after_s) +
           ',' + to_string(r.mode) + ',' + std::to_string(r.sample_rate_hz) + "\n";
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_manifest(const std::vector<MixtureSpec>& rows, const std::filesystem::path& path) {
  write_text(path, manifest_csv(rows));
}

inline std::vector<MixtureSpec> read_manifest(const std::filesystem::path& path) {
  std::vector<std::string> header;
  const auto rows = read_csv_rows(path, header);
  if (split_csv_line(kManifestHeader) != header) throw IoError(path.string() + ": unexpected manifest header");
  std::vector<MixtureSpec> out;
  for (const auto& r : rows) {
    MixtureSpec s;
    s.mixture_id = r[0];
    s.s1_path = r[1];
    s.s2_path = r[2];
    s.rel_level_db = parse_double(r[3], "rel_level_db");
    s.speaker_gain_db = parse_double(r[4], "speaker_gain_db");
    s.noise_path = r[5];
    s.noise_offset_s = parse_double(r[6], "noise_offset_s");
    s.noise_snr_db = parse_double(r[7], "noise_snr_db");
    s.pad_before_s = parse_double(r[8], "pad_before_s");
    s.pad_after_s = parse_double(r[9], "pad_after_s");
    s.mode = parse_mode(r[10]);
    s.sample_rate_hz = static_cast<int>(parse_double(r[11], "sample_rate_hz"));
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

/// Pair list: mixture_id,s1_path,s2_path[,rel_level_db].
inline std::vector<SpeechPair> read_pair_list(const std::filesystem::path& path) {
  std::vector<std::string> header;
  const auto rows = read_csv_rows(path, header);
  const auto id = column(header, "mixture_id", path.string());
  const auto s1 = column(header, "s1_path", path.string());
  const auto s2 = column(header, "s2_path", path.string());
  std::optional<std::size_t> rel;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "rel_level_db") rel = i;
  }
  std::vector<SpeechPair> out;
  for (const auto& r : rows) {
    SpeechPair p{r[id], r[s1], r[s2], std::nullopt};
    if (rel && !r[*rel].empty()) p.rel_level_db = parse_double(r[*rel], "rel_level_db");
    out.push_back(std::move(p));
  }
  return out;
}

// ---- noise index --------------------------------------------------------------

inline nlohmann::ordered_json clips_json(const NoiseIndex& index) {
  auto clips = nlohmann::ordered_json::array();
  for (const auto& c : index.clips) {
    clips.push_back({{"path", c.path},
                     {"recording_id", c.recording_id},
                     {"location_id", c.location_id},
                     {"band", c.band},
                     {"split", to_string(c.split)},
                     {"sample_rate_hz", c.sample_rate_hz},
                     {"file_frames", c.file_frames},
                     {"start_frame", c.start_frame},
                     {"frame_count", c.frame_count}});
  }
  return clips;
}

/// Content digest over the edges and clip table.
inline std::string index_digest(const NoiseIndex& index) {
  nlohmann::ordered_json j;
  j["edges"] = index.edges;
  j["clips"] = clips_json(index);
  return hex64(fnv1a64(j.dump()));
}

/// `extra` carries curation details (bins, splits, leak statistics).
inline std::string noise_index_json(const NoiseIndex& index, const nlohmann::ordered_json& extra = {}) {
  nlohmann::ordered_json j;
  j["tool_version"] = kToolVersion;
  j["digest"] = index_digest(index);
  j["edges"] = index.edges;
  if (!extra.is_null()) {
    for (const auto& [k, v] : extra.items()) j[k] = v;
  }
  j["clips"] = clips_json(index);
  return j.dump(2) + "\n";
}

inline NoiseIndex read_noise_index(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
    NoiseIndex index;
    index.edges = j.at("edges").get<std::array<double, kBinCount - 1>>();
    for (const auto& c : j.at("clips")) {
      NoiseClip clip;
      clip.path = c.at("path").get<std::string>();
      clip.recording_id = c.at("recording_id").get<std::string>();
      clip.location_id = c.at("location_id").get<std::string>();
      clip.band = c.at("band").get<int>();
      clip.split = parse_split(c.at("split").get<std::string>());
      clip.sample_rate_hz = c.at("sample_rate_hz").get<int>();
      clip.file_frames = c.at("file_frames").get<std::size_t>();
      clip.start_frame = c.at("start_frame").get<std::size_t>();
      clip.frame_count = c.at("frame_count").get<std::size_t>();
      if (clip.start_frame + clip.frame_count > clip.file_frames) throw IoError("clip exceeds its file: " + clip.path);
      index.clips.push_back(std::move(clip));
    }
    return index;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed noise index " + path.string() + ": " + e.what());
  }
}

inline std::string manifest_sidecar_json(std::uint64_t global_seed, const std::string& noise_index_digest,
                                         MixMode mode, int rate, std::size_t rows) {
  nlohmann::ordered_json j;
  j["global_seed"] = global_seed;
  j["tool_version"] = kToolVersion;
  j["noise_index_digest"] = noise_index_digest;
  j["mode"] = to_string(mode);
  j["sample_rate_hz"] = rate;
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

}  // namespace mixkit
