#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace driftlab {

inline constexpr const char* kToolVersion = "0.1.0";

/// Flat key=value experiment description.  Every key is materialized with
/// its default at construction, so a run never depends on implicit state;
/// unknown keys are rejected with a line/field diagnostic.
class ExperimentConfig {
 public:
  static ExperimentConfig make(const std::string& kind);
  /// Parse `key = value` lines ('#' comments); the file must set `kind`.
  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_text(const std::string& text,
                                    const std::string& origin = "<text>");

  const std::string& kind() const { return kind_; }
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& str(const std::string& key) const;
  double num(const std::string& key) const;
  long integer(const std::string& key) const;

  /// Sorted `key = value` lines; round-trips use this form.
  std::string canonical() const;
  /// Hash of the canonical form minus the `out` key: the output directory
  /// is not part of the experiment's identity.
  std::uint64_t hash() const;
  void write_file(const std::string& path) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::string kind_;
  std::map<std::string, std::string> values_;
};

struct CriterionResult {
  int index = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

struct RunManifest {
  std::uint64_t config_hash = 0;
  std::string tool_version = kToolVersion;
  double wall_seconds = 0;
  std::map<std::string, double> constants;       // C_S, Omega_d readings, ...
  std::map<std::string, std::string> outputs;    // artifact name -> path
  std::vector<CriterionResult> criteria;

  std::string to_json(const ExperimentConfig& cfg) const;
  void write(const std::string& path, const ExperimentConfig& cfg) const;
};

/// Deterministic experiment runner; artifacts land in the config's `out`
/// directory (created if needed).
RunManifest run_experiment(const ExperimentConfig& cfg);

enum class VerifyLevel { Quick, Full };

CriterionResult verify_criterion(int index, VerifyLevel level,
                                 const std::string& out_dir);
/// Runs all (or a subset of) the 13 acceptance criteria, printing one
/// pass/fail line each; writes verify.csv and a manifest.
std::vector<CriterionResult> verify_suite(VerifyLevel level,
                                          const std::string& out_dir,
                                          const std::vector<int>& subset = {});

int criterion_count();
std::string criterion_name(int index);

/// Output root: $DRIFTLAB_OUT if set, else ./out.
std::string output_root();

}  // namespace driftlab
