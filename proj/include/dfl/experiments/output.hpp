// Copyright 2026 The dfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tidy CSV tables, JSON summaries and the run manifest.

#pragma once

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfl/core.hpp"
#include "dfl/sme_engine.hpp"

namespace dfl::experiments {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "dfl 1.0.0";

/// 17 significant digits; non-finite values spelled nan/inf/-inf.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Compact form for file names and messages.
inline std::string format_short(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

/// Column-named numeric table.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add_row(std::vector<double> row) {
    if (row.size() != columns.size()) throw DomainError("Table: row width does not match header");
    rows.push_back(std::move(row));
  }
  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    throw DomainError("Table: no column '" + name + "'");
  }
  std::vector<double> column(const std::string& name) const {
    const std::size_t i = column_index(name);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[i]);
    return out;
  }
};

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + format_double(r[i]);
    out += '\n';
  }
  return out;
}

/// Writes via a sibling temporary file and rename, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

/// Trajectory dump: t, fidelity, dy_1..dy_k (dy summed over each sampling interval).
inline Table trajectory_table(const sme::TrajectoryRecord& rec) {
  Table t;
  t.columns = {"t", "fidelity"};
  for (std::size_t c = 0; c < rec.photocurrents.size(); ++c) t.columns.push_back("dy_" + std::to_string(c + 1));
  for (std::size_t s = 0; s < rec.times.size(); ++s) {
    std::vector<double> row{rec.times[s], rec.fidelities[s]};
    for (const auto& ch : rec.photocurrents) row.push_back(ch[s]);
    t.add_row(std::move(row));
  }
  return t;
}

/// Ensemble dump: t, mean_fidelity, stderr.
inline Table ensemble_table(const sme::EnsembleStats& st) {
  Table t;
  t.columns = {"t", "mean_fidelity", "stderr"};
  for (std::size_t s = 0; s < st.times.size(); ++s) t.add_row({st.times[s], st.mean_fidelity[s], st.stderr_fidelity[s]});
  return t;
}

/// Output directory bookkeeping: the manifest is written first and rewritten
/// with checksums after each data file lands.
class RunWriter {
 public:
  RunWriter(std::filesystem::path dir, nlohmann::json manifest) : dir_(std::move(dir)), manifest_(std::move(manifest)) {
    std::filesystem::create_directories(dir_);
    manifest_["schema_version"] = kSchemaVersion;
    manifest_["code_version"] = kCodeVersion;
    manifest_["outputs"] = nlohmann::json::object();
    flush_manifest();
  }

  void write(const std::string& name, const std::string& content) {
    write_file_atomic(dir_ / name, content);
    manifest_["outputs"][name] = {{"sha256", sha256_hex(content)}, {"bytes", content.size()}};
    flush_manifest();
  }
  void write_csv(const std::string& name, const Table& t) { write(name, to_csv(t)); }
  void write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

  const std::filesystem::path& dir() const { return dir_; }
  const nlohmann::json& manifest() const { return manifest_; }

 private:
  void flush_manifest() { write_file_atomic(dir_ / "manifest.json", manifest_.dump(2) + "\n"); }

  std::filesystem::path dir_;
  nlohmann::json manifest_;
};

}  // namespace dfl::experiments
