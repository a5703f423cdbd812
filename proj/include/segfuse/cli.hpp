#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segfuse/metrics.hpp"
#include "segfuse/nifti_io.hpp"
#include "segfuse/postprocess.hpp"
#include "segfuse/splits.hpp"

namespace segfuse::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitIo = 2,
  kExitPartialFailure = 3,
};

inline constexpr int kFormatVersion = 1;

// ---- report formats -------------------------------------------------------

/// Shortest decimal that round-trips the value.
std::string format_number(double v);
std::string format_number(float v);

std::string postprocess_report_json(const PostprocessReport& report);

struct CaseResult {
  std::string subject_id;
  MetricReport metrics;
};

/// Columns: subject_id,dice,lesion_f1,slc,vd,hd95,pred_components,gt_components.
/// An undefined hd95 is an empty field.
std::string metrics_csv(std::span<const CaseResult> rows);
std::string aggregate_json(const AggregateReport& agg, const EvaluationOptions& options);

std::string folds_csv(const FoldAssignment& fa);
std::string fold_summary_json(const FoldAssignment& fa, std::span<const FoldSummary> summary);

/// Minimal CSV reader: header row plus rows of comma-separated fields, no
/// quoting. Blank lines are skipped; whitespace around fields is trimmed.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::size_t column(const std::string& name) const;
};
CsvTable read_csv(const fs::path& path);

std::vector<SubjectRecord> read_cohort_csv(const fs::path& path);

/// Writes `content` unless the file already holds exactly those bytes.
/// Returns true when a write happened.
bool write_file_if_changed(const fs::path& path, std::string_view content);

// ---- commands -------------------------------------------------------------

struct EnsembleOptions {
  std::vector<fs::path> inputs;
  fs::path output;
  std::vector<double> weights;
  nifti::Datatype datatype = nifti::Datatype::kFloat32;
};
void run_ensemble(const EnsembleOptions& options);

struct PostprocessOptions {
  fs::path input;
  fs::path output_mask;
  fs::path report;
  PostprocessParams params;
};
PostprocessReport run_postprocess(const PostprocessOptions& options);

struct CaseSpec {
  std::string subject_id;
  fs::path pred;
  fs::path gt;
};

/// Manifest columns: subject_id,pred,gt. Relative paths resolve against the
/// given directories.
std::vector<CaseSpec> read_manifest(const fs::path& manifest, const fs::path& pred_dir,
                                    const fs::path& gt_dir);

struct EvaluateOptions {
  std::vector<CaseSpec> cases;
  fs::path csv;
  fs::path json;
  EvaluationOptions evaluation;
  unsigned jobs = 1;
};

/// Evaluates every case (rows sorted by subject_id). Throws IoError listing
/// all subjects with a missing file before any work is done.
std::vector<CaseResult> run_evaluate(const EvaluateOptions& options);

struct SplitOptions {
  fs::path input;
  std::size_t k = 5;
  std::uint64_t seed = 0;
  fs::path output;
  fs::path summary;
};
FoldAssignment run_split(const SplitOptions& options);

struct PipelineSubject {
  std::string id;
  std::vector<fs::path> maps;
  std::optional<fs::path> ground_truth;
};

struct PipelineConfig {
  std::vector<PipelineSubject> subjects;
  fs::path output_dir;
  std::vector<double> weights;
  PostprocessParams params;
  EvaluationOptions evaluation;
};

/// Parses a pipeline config. Relative paths resolve against `base_dir`.
PipelineConfig parse_pipeline_config(const std::string& json_text, const fs::path& base_dir);

/// Applies `postprocess` parameter keys (base_threshold, high_threshold,
/// min_peak_probability, small_case_cutoff, connectivity) found in a JSON
/// object, either at top level or under a "postprocess" key.
void apply_params_json(const std::string& json_text, PostprocessParams& params);

struct SubjectPaths {
  fs::path ensemble;
  fs::path mask;
  fs::path report;
};
SubjectPaths subject_paths(const fs::path& output_dir, const std::string& id);

struct PipelineOutcome {
  std::size_t processed = 0;
  std::size_t skipped = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // (subject, message)
};

/// Runs ensemble -> postprocess per subject, then evaluate over subjects with
/// ground truth. Subjects whose outputs exist are skipped unless `force`.
PipelineOutcome run_pipeline(const PipelineConfig& config, bool force, unsigned jobs);

/// Command-line entry point. `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace segfuse::cli
