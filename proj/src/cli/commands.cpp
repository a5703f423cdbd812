#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "segfuse/cli.hpp"
#include "segfuse/ensemble.hpp"

namespace segfuse::cli {

namespace {

// Runs task(i) for i in [0, n) on up to `jobs` threads. Each index is handled
// exactly once; callers write results into per-index slots.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& task) {
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) task(i);
    });
  }
}

ProbabilityMap read_probability_map(const fs::path& path) {
  try {
    return ProbabilityMap(nifti::read_volume(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

BinaryMask read_mask(const fs::path& path) {
  try {
    return BinaryMask::from_scalar(nifti::read_volume(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

void validate_subject_id(const std::string& id) {
  if (id.empty() || id == "." || id == ".." || id.find('/') != std::string::npos ||
      id.find('\\') != std::string::npos) {
    throw ValidationError("subject id '" + id + "' cannot be used as a directory name");
  }
}

}  // namespace

void run_ensemble(const EnsembleOptions& options) {
  if (options.inputs.empty()) throw ValidationError("ensemble needs at least one input map");
  std::vector<ProbabilityMap> maps;
  maps.reserve(options.inputs.size());
  for (const auto& p : options.inputs) maps.push_back(read_probability_map(p));
  const ProbabilityMap mean = average_maps(maps, options.weights);
  nifti::write_volume(mean.as_scalar(), options.output, options.datatype,
                      nifti::has_gzip_suffix(options.output));
}

PostprocessReport run_postprocess(const PostprocessOptions& options) {
  options.params.validate();
  const ProbabilityMap p = read_probability_map(options.input);
  auto result = postprocess(p, options.params);
  nifti::write_mask(result.mask, options.output_mask, nifti::has_gzip_suffix(options.output_mask));
  write_file_if_changed(options.report, postprocess_report_json(result.report));
  return result.report;
}

std::vector<CaseSpec> read_manifest(const fs::path& manifest, const fs::path& pred_dir,
                                    const fs::path& gt_dir) {
  const CsvTable t = read_csv(manifest);
  const auto id_col = t.column("subject_id");
  const auto pred_col = t.column("pred");
  const auto gt_col = t.column("gt");
  std::vector<CaseSpec> out;
  std::set<std::string> seen;
  for (const auto& row : t.rows) {
    if (!seen.insert(row[id_col]).second) {
      throw ValidationError("duplicate subject_id '" + row[id_col] + "' in manifest");
    }
    out.push_back({row[id_col], resolve(pred_dir, row[pred_col]), resolve(gt_dir, row[gt_col])});
  }
  return out;
}

std::vector<CaseResult> run_evaluate(const EvaluateOptions& options) {
  if (options.cases.empty()) throw ValidationError("evaluation needs at least one case");
  std::vector<CaseSpec> cases = options.cases;
  std::sort(cases.begin(), cases.end(),
            [](const CaseSpec& a, const CaseSpec& b) { return a.subject_id < b.subject_id; });

  std::string missing;
  for (const auto& c : cases) {
    if (!fs::exists(c.pred) || !fs::exists(c.gt)) {
      missing += (missing.empty() ? "" : ", ") + c.subject_id;
    }
  }
  if (!missing.empty()) throw IoError("missing prediction or ground truth for: " + missing);

  std::vector<CaseResult> results(cases.size());
  std::vector<std::string> errors(cases.size());
  parallel_for(cases.size(), options.jobs, [&](std::size_t i) {
    try {
      const BinaryMask pred = read_mask(cases[i].pred);
      const BinaryMask gt = read_mask(cases[i].gt);
      require_compatible(pred.grid(), gt.grid(), cases[i].subject_id);
      results[i] = {cases[i].subject_id, evaluate_case(pred, gt, options.evaluation)};
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!errors[i].empty()) throw ValidationError(cases[i].subject_id + ": " + errors[i]);
  }

  std::vector<MetricReport> reports;
  for (const auto& r : results) reports.push_back(r.metrics);
  const AggregateReport agg = aggregate(reports);
  if (!options.csv.empty()) write_file_if_changed(options.csv, metrics_csv(results));
  if (!options.json.empty()) write_file_if_changed(options.json, aggregate_json(agg, options.evaluation));
  return results;
}

FoldAssignment run_split(const SplitOptions& options) {
  const auto records = read_cohort_csv(options.input);
  const FoldAssignment fa = size_balanced_split(records, options.k, options.seed);
  if (!options.output.empty()) write_file_if_changed(options.output, folds_csv(fa));
  if (!options.summary.empty()) {
    write_file_if_changed(options.summary, fold_summary_json(fa, fold_summary(fa, records)));
  }
  return fa;
}

void apply_params_json(const std::string& json_text, PostprocessParams& params) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  const nlohmann::json& src = j.contains("postprocess") ? j.at("postprocess") : j;
  try {
    if (src.contains("base_threshold")) params.base_threshold = src.at("base_threshold").get<double>();
    if (src.contains("high_threshold")) params.high_threshold = src.at("high_threshold").get<double>();
    if (src.contains("min_peak_probability")) {
      params.min_peak_probability = src.at("min_peak_probability").get<double>();
    }
    if (src.contains("small_case_cutoff")) {
      params.small_case_cutoff = src.at("small_case_cutoff").get<std::size_t>();
    }
    if (j.contains("connectivity")) params.connectivity = connectivity_from_int(j.at("connectivity").get<int>());
    if (src.contains("connectivity")) params.connectivity = connectivity_from_int(src.at("connectivity").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config has a mistyped postprocess field: ") + e.what());
  }
}

PipelineConfig parse_pipeline_config(const std::string& json_text, const fs::path& base_dir) {
  PipelineConfig cfg;
  apply_params_json(json_text, cfg.params);
  const auto j = nlohmann::json::parse(json_text);
  try {
    if (!j.contains("output_dir")) throw ValidationError("pipeline config needs output_dir");
    cfg.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    cfg.evaluation.connectivity = cfg.params.connectivity;
    if (j.contains("weights")) cfg.weights = j.at("weights").get<std::vector<double>>();
    if (j.contains("evaluation")) {
      const auto& ev = j.at("evaluation");
      if (ev.contains("hd95_variant")) {
        const auto v = ev.at("hd95_variant").get<std::string>();
        if (v == "pooled") {
          cfg.evaluation.hd_variant = HausdorffVariant::kPooled;
        } else if (v == "max_of_directed") {
          cfg.evaluation.hd_variant = HausdorffVariant::kMaxOfDirected;
        } else {
          throw ValidationError("unknown hd95_variant '" + v + "'");
        }
      }
      if (ev.contains("vd_units")) {
        const auto v = ev.at("vd_units").get<std::string>();
        if (v != "voxels" && v != "mm3") throw ValidationError("unknown vd_units '" + v + "'");
        cfg.evaluation.vd_unit = v == "voxels" ? VolumeUnit::kVoxels : VolumeUnit::kCubicMillimetres;
      }
    }
    if (!j.contains("subjects") || !j.at("subjects").is_array()) {
      throw ValidationError("pipeline config needs a subjects array");
    }
    std::set<std::string> seen;
    for (const auto& s : j.at("subjects")) {
      PipelineSubject subject;
      subject.id = s.at("id").get<std::string>();
      validate_subject_id(subject.id);
      if (!seen.insert(subject.id).second) {
        throw ValidationError("duplicate subject id '" + subject.id + "'");
      }
      for (const auto& m : s.at("maps")) subject.maps.push_back(resolve(base_dir, m.get<std::string>()));
      if (subject.maps.empty()) throw ValidationError("subject '" + subject.id + "' lists no maps");
      if (s.contains("ground_truth") && !s.at("ground_truth").is_null()) {
        subject.ground_truth = resolve(base_dir, s.at("ground_truth").get<std::string>());
      }
      cfg.subjects.push_back(std::move(subject));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("pipeline config: ") + e.what());
  }
  cfg.params.validate();
  return cfg;
}

SubjectPaths subject_paths(const fs::path& output_dir, const std::string& id) {
  const fs::path dir = output_dir / id;
  return {dir / "ensemble.nii.gz", dir / "mask.nii.gz", dir / "postprocess.json"};
}

PipelineOutcome run_pipeline(const PipelineConfig& config, bool force, unsigned jobs) {
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create " + config.output_dir.string() + ": " + ec.message());

  const std::size_t n = config.subjects.size();
  std::vector<std::string> errors(n);
  std::vector<char> skipped(n, 0);
  parallel_for(n, jobs, [&](std::size_t i) {
    const auto& subject = config.subjects[i];
    const SubjectPaths paths = subject_paths(config.output_dir, subject.id);
    try {
      if (!force && fs::exists(paths.ensemble) && fs::exists(paths.mask) &&
          fs::exists(paths.report)) {
        skipped[i] = 1;
        return;
      }
      fs::create_directories(paths.ensemble.parent_path());
      run_ensemble({subject.maps, paths.ensemble, config.weights, nifti::Datatype::kFloat32});
      run_postprocess({paths.ensemble, paths.mask, paths.report, config.params});
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  PipelineOutcome outcome;
  std::vector<CaseSpec> cases;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& subject = config.subjects[i];
    if (!errors[i].empty()) {
      outcome.failures.emplace_back(subject.id, errors[i]);
      continue;
    }
    (skipped[i] ? outcome.skipped : outcome.processed)++;
    if (!subject.ground_truth) continue;
    if (!fs::exists(*subject.ground_truth)) {
      outcome.failures.emplace_back(subject.id,
                                    "ground truth " + subject.ground_truth->string() + " not found");
      continue;
    }
    cases.push_back({subject.id, subject_paths(config.output_dir, subject.id).mask,
                     *subject.ground_truth});
  }

  if (!cases.empty()) {
    // Evaluate one case at a time first so a bad case fails only itself.
    std::vector<CaseSpec> good;
    std::vector<std::string> eval_errors(cases.size());
    parallel_for(cases.size(), jobs, [&](std::size_t i) {
      try {
        const BinaryMask pred = read_mask(cases[i].pred);
        const BinaryMask gt = read_mask(cases[i].gt);
        require_compatible(pred.grid(), gt.grid());
      } catch (const std::exception& e) {
        eval_errors[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < cases.size(); ++i) {
      if (eval_errors[i].empty()) {
        good.push_back(cases[i]);
      } else {
        outcome.failures.emplace_back(cases[i].subject_id, eval_errors[i]);
      }
    }
    if (!good.empty()) {
      run_evaluate({good, config.output_dir / "metrics.csv", config.output_dir / "aggregate.json",
                    config.evaluation, jobs});
    }
  }
  std::sort(outcome.failures.begin(), outcome.failures.end());
  return outcome;
}

}  // namespace segfuse::cli
