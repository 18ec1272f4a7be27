#pragma once

// File formats.
//
// Feature file (CSV, UTF-8, '.' decimal separator, no quoting):
//     sample_id,subject_id,label,f0,f1,...,f{d-1}
// label is a class name; subject ids are raw and are scoped to their session
// at load time unless the manifest sets cross_session_subjects.
//
// Manifest (JSON):
//     { "name": str, "feature_dim": int, "cross_session_subjects": bool?,
//       "sessions": [ { "name": str, "year": int?, "label_names": [str...],
//                       "features_path": str, "min_samples_per_class": int? } ] }
// features_path is resolved relative to the manifest's directory.
//
// Split file (CSV): session,sample_id,subject_id,fold

#include "cdil/core.hpp"
#include "cdil/metrics.hpp"
#include "cdil/pipeline.hpp"
#include "cdil/splitters.hpp"
#include "cdil/synth.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cdil {

struct ManifestSession {
  std::string name;
  std::optional<int> year;
  std::vector<std::string> label_names;
  std::string features_path;  // as written in the manifest
  int min_samples_per_class = 0;

  bool operator==(const ManifestSession&) const = default;
};

struct Manifest {
  std::string name;
  int feature_dim = 0;
  bool cross_session_subjects = false;
  std::vector<ManifestSession> sessions;
  /// Directory that relative features_path entries resolve against.
  std::filesystem::path base_dir;

  /// Registry over the declared label names in first-appearance order.
  LabelRegistry declared_registry() const;
  std::filesystem::path resolve(const ManifestSession& s) const;

  bool operator==(const Manifest& o) const {
    return name == o.name && feature_dim == o.feature_dim &&
           cross_session_subjects == o.cross_session_subjects && sessions == o.sessions;
  }
};

/// Parses and validates a manifest, including each feature file's header
/// width against feature_dim. Throws LoadError.
Manifest load_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Parses session t's feature file. Classes with fewer than
/// min_samples_per_class samples are dropped with a logged notice. Surviving
/// classes are registered in the session's declared order.
SessionDataset load_session_features(const Manifest& manifest, SessionIndex t,
                                     LabelRegistry& registry);

SessionSequence load_sequence(const Manifest& manifest);

/// Writes manifest.json plus one session_<t>.csv per session into dir and
/// returns the manifest path.
std::filesystem::path write_stream(const SessionSequence& seq, const std::filesystem::path& dir,
                                   const std::string& name = "stream");

void write_split_csv(const SessionSequence& seq, const std::vector<FoldAssignment>& assignments,
                     const std::filesystem::path& path);

nlohmann::ordered_json synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);
SynthSpec load_synth_spec(const std::filesystem::path& path);

/// Config echo. Output location, thread count and verbosity are omitted so
/// that reports do not depend on where or how a run executed.
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
/// Relative manifest paths resolve against base_dir.
ExperimentConfig config_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::ordered_json trial_to_json(const TrialResult& trial);
TrialResult trial_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::ordered_json& j);

/// Table rows of per-session means, average and final accuracy in percent,
/// two decimals.
std::string format_report_table(const ExperimentReport& report, const std::string& method);
/// "<learner> (<PROTOCOL>)" from a config echo; "method" without a learner.
std::string method_label(const nlohmann::ordered_json& config);

/// Writes report.json (machine, full precision) and report.txt (table) into
/// dir. Throws ProtocolError for a report without trials.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

/// Per-trial file trial_<tau>.json carrying the config echo.
void write_trial(const TrialResult& trial, const nlohmann::ordered_json& config,
                 const std::filesystem::path& dir);
/// Re-aggregates every trial_<tau>.json found in dir.
ExperimentReport reaggregate_trials(const std::filesystem::path& dir);

}  // namespace cdil
