#pragma once

// Newline-delimited sample records, one JSON object per line:
//   {"features":[...],"output_bin":3,"raw_output":0.42,"prediction":[...],"stalled":0}
// Writers additionally emit arrival_index, iteration, source and noise (and
// loss when present) so that a recorded stream replays field-for-field.
// Readers ignore unknown keys.

#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "memento/error.hpp"
#include "memento/sample.hpp"

namespace memento {

struct SampleRecord {
  Sample sample;
  std::optional<std::int64_t> iteration;
};

inline std::string to_record(const Sample& s, std::optional<std::int64_t> iteration = std::nullopt) {
  nlohmann::json j;
  j["features"] = s.features;
  j["output_bin"] = s.output_bin;
  j["raw_output"] = s.raw_output;
  j["prediction"] = s.prediction.probs;
  j["stalled"] = s.stalled ? 1 : 0;
  j["arrival_index"] = s.arrival_index;
  if (s.loss) j["loss"] = *s.loss;
  j["source"] = s.source;
  j["noise"] = s.noise ? 1 : 0;
  if (iteration) j["iteration"] = *iteration;
  return j.dump();
}

/// Parses one record line. `default_index` fills arrival_index when absent.
inline SampleRecord parse_record(const std::string& line, std::uint64_t default_index) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse_error, e.what());
  }
  if (!j.is_object()) fail(Errc::parse_error, "record is not an object");
  auto require = [&](const char* key) -> const nlohmann::json& {
    auto it = j.find(key);
    if (it == j.end()) fail(Errc::parse_error, std::string("missing field '") + key + "'");
    return *it;
  };
  SampleRecord rec;
  Sample& s = rec.sample;
  try {
    s.features = require("features").get<std::vector<double>>();
    s.output_bin = require("output_bin").get<std::size_t>();
    s.raw_output = require("raw_output").get<double>();
    s.prediction = CategoricalDistribution(require("prediction").get<std::vector<double>>());
    const auto& stalled = require("stalled");
    s.stalled = stalled.is_boolean() ? stalled.get<bool>() : stalled.get<int>() != 0;
    s.arrival_index = j.value("arrival_index", default_index);
    if (auto it = j.find("loss"); it != j.end() && !it->is_null()) s.loss = it->get<double>();
    s.source = j.value("source", -1);
    if (auto it = j.find("noise"); it != j.end()) {
      s.noise = it->is_boolean() ? it->get<bool>() : it->get<int>() != 0;
    }
    if (auto it = j.find("iteration"); it != j.end()) rec.iteration = it->get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse_error, e.what());
  }
  return rec;
}

inline std::vector<SampleRecord> read_records(std::istream& in) {
  std::vector<SampleRecord> out;
  std::string line;
  std::uint64_t index = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_record(line, index++));
  }
  return out;
}

inline std::vector<SampleRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot open " + path);
  return read_records(in);
}

inline void write_records(std::ostream& out, const std::vector<Sample>& samples,
                          std::optional<std::int64_t> iteration = std::nullopt) {
  for (const auto& s : samples) out << to_record(s, iteration) << '\n';
}

inline void write_records(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, "cannot write " + path);
  write_records(out, samples);
}

}  // namespace memento
