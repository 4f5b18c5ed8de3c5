#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "logsde/common.hpp"

#include "json.hpp"

namespace logsde {

// Experiment description: kind, field key + parameters, numeric parameters,
// seed. Round-trips losslessly through JSON; the digest of the canonical
// serialization is embedded in every result file so outputs can be traced to
// the exact configuration that produced them.
struct Manifest {
  int schema_version = 1;
  std::string experiment;
  std::string field_key;            // empty for profile-only experiments
  nlohmann::json field_params = nlohmann::json::object();
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string out_dir;              // optional default output directory

  static Manifest from_json(const nlohmann::json& j);
  static Manifest from_string(const std::string& text);
  static Manifest from_file(const std::string& path);
  nlohmann::json to_json() const;
  std::string canonical() const;    // sorted-key single-line dump
  std::uint64_t digest() const { return fnv1a64(canonical()); }
  std::string digest_hex() const;
};

// Names of the supported experiments, i.e. valid `experiment` values.
const std::vector<std::string>& experiment_names();

struct RunResult {
  int exit_code = 0;                  // 0 ok, 2 validation, 3 numerical
  std::vector<std::string> files;     // artifacts written (absolute or out-relative)
  std::string diagnostic;             // JSON diagnostic on failure, empty on success
};

// Runs the experiment and writes `<experiment>.csv` plus
// `<experiment>_summary.json` under out_dir. Validation happens before any
// file is written; dry_run stops after validation. Results are independent
// of the thread cap.
RunResult run_manifest(const Manifest& manifest, const std::string& out_dir, int threads,
                       bool dry_run);

}  // namespace logsde
