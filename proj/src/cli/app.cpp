#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "segfuse/cli.hpp"

namespace segfuse::cli {

namespace {

struct ParamFlags {
  std::optional<double> base_threshold;
  std::optional<double> high_threshold;
  std::optional<double> min_peak_probability;
  std::optional<std::size_t> small_case_cutoff;
  std::optional<int> connectivity;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--base-threshold", base_threshold, "Foreground threshold (default 0.5)");
    cmd.add_option("--high-threshold", high_threshold,
                   "Re-threshold for large cases (default 0.55)");
    cmd.add_option("--min-peak-prob", min_peak_probability,
                   "Components with a lower peak are dropped in small cases (default 0.7)");
    cmd.add_option("--small-case-cutoff", small_case_cutoff,
                   "Foreground voxel count separating small from large cases (default 5000)");
    cmd.add_option("--connectivity", connectivity, "Neighbourhood: 6, 18 or 26 (default 26)");
  }

  void apply(PostprocessParams& p) const {
    if (base_threshold) p.base_threshold = *base_threshold;
    if (high_threshold) p.high_threshold = *high_threshold;
    if (min_peak_probability) p.min_peak_probability = *min_peak_probability;
    if (small_case_cutoff) p.small_case_cutoff = *small_case_cutoff;
    if (connectivity) p.connectivity = connectivity_from_int(*connectivity);
  }
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

HausdorffVariant parse_variant(const std::string& s) {
  if (s == "pooled") return HausdorffVariant::kPooled;
  if (s == "max_of_directed") return HausdorffVariant::kMaxOfDirected;
  throw ValidationError("--hd95-variant must be pooled or max_of_directed");
}

VolumeUnit parse_vd_units(const std::string& s) {
  if (s == "voxels") return VolumeUnit::kVoxels;
  if (s == "mm3") return VolumeUnit::kCubicMillimetres;
  throw ValidationError("--vd-units must be voxels or mm3");
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Probability-map fusion, lesion post-processing and segmentation scoring"};
  app.require_subcommand(1);

  // ensemble
  EnsembleOptions ens;
  std::string ens_datatype = "float32";
  auto* ensemble = app.add_subcommand("ensemble", "Average per-model probability maps");
  ensemble->add_option("inputs", ens.inputs, "Probability maps (NIfTI)")->required();
  ensemble->add_option("-o,--output", ens.output, "Output map; .gz suffix compresses")->required();
  ensemble->add_option("--weights", ens.weights, "Per-map weights")->delimiter(',');
  ensemble->add_option("--datatype", ens_datatype, "float32 or float64");

  // postprocess
  PostprocessOptions pp;
  fs::path pp_config;
  ParamFlags pp_flags;
  auto* post = app.add_subcommand("postprocess", "Threshold and prune a probability map");
  post->add_option("-i,--input", pp.input, "Probability map")->required();
  post->add_option("-m,--output-mask", pp.output_mask, "Output uint8 mask")->required();
  post->add_option("-r,--report", pp.report, "Output JSON report")->required();
  post->add_option("--config", pp_config, "JSON file with postprocess parameters");
  pp_flags.add_to(*post);

  // evaluate
  fs::path manifest, pred_dir, gt_dir, csv_out, json_out;
  int eval_connectivity = 26;
  std::string hd_variant = "pooled";
  std::string vd_units = "voxels";
  unsigned eval_jobs = default_jobs();
  auto* evaluate = app.add_subcommand("evaluate", "Score predicted masks against ground truth");
  evaluate->add_option("--manifest", manifest, "CSV with subject_id,pred,gt")->required();
  evaluate->add_option("--pred-dir", pred_dir, "Base directory for relative pred paths");
  evaluate->add_option("--gt-dir", gt_dir, "Base directory for relative gt paths");
  evaluate->add_option("--csv", csv_out, "Per-case metrics CSV")->required();
  evaluate->add_option("--json", json_out, "Aggregate JSON")->required();
  evaluate->add_option("--connectivity", eval_connectivity, "Neighbourhood: 6, 18 or 26");
  evaluate->add_option("--hd95-variant", hd_variant, "pooled or max_of_directed");
  evaluate->add_option("--vd-units", vd_units, "voxels or mm3");
  evaluate->add_option("--jobs", eval_jobs, "Worker threads");

  // split
  SplitOptions sp;
  unsigned split_jobs = 1;
  auto* split = app.add_subcommand("split", "Size-balanced K-fold assignment");
  split->add_option("-i,--input", sp.input, "CSV with subject_id,lesion_volume")->required();
  split->add_option("-k,--folds", sp.k, "Number of folds");
  split->add_option("--seed", sp.seed, "Shuffle seed");
  split->add_option("-o,--output", sp.output, "Output CSV subject_id,fold")->required();
  split->add_option("--summary", sp.summary, "Output JSON fold summary");
  split->add_option("--jobs", split_jobs, "Accepted for interface symmetry; splitting is serial");

  // pipeline
  fs::path pipe_config;
  bool force = false;
  unsigned pipe_jobs = default_jobs();
  ParamFlags pipe_flags;
  auto* pipeline = app.add_subcommand("pipeline", "Ensemble, post-process and evaluate a cohort");
  pipeline->add_option("--config", pipe_config, "Pipeline JSON config")->required();
  pipeline->add_option("--jobs", pipe_jobs, "Subjects processed concurrently");
  pipeline->add_flag("--force", force, "Recompute subjects whose outputs already exist");
  pipe_flags.add_to(*pipeline);

  std::vector<const char*> argv{"segfuse"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*ensemble) {
      ens.datatype = nifti::parse_datatype(ens_datatype);
      if (ens.datatype != nifti::Datatype::kFloat32 && ens.datatype != nifti::Datatype::kFloat64) {
        throw ValidationError("ensemble output datatype must be float32 or float64");
      }
      run_ensemble(ens);
    } else if (*post) {
      if (!pp_config.empty()) apply_params_json(read_text(pp_config), pp.params);
      pp_flags.apply(pp.params);
      const auto report = run_postprocess(pp);
      out << pp.input.string() << ": " << to_string(report.branch) << " case, components "
          << report.components_before << " -> " << report.components_after << "\n";
    } else if (*evaluate) {
      EvaluateOptions eo;
      eo.cases = read_manifest(manifest, pred_dir, gt_dir);
      eo.csv = csv_out;
      eo.json = json_out;
      eo.evaluation.connectivity = connectivity_from_int(eval_connectivity);
      eo.evaluation.hd_variant = parse_variant(hd_variant);
      eo.evaluation.vd_unit = parse_vd_units(vd_units);
      eo.jobs = eval_jobs;
      const auto rows = run_evaluate(eo);
      out << "evaluated " << rows.size() << " cases\n";
    } else if (*split) {
      const auto fa = run_split(sp);
      out << "assigned " << fa.fold_of.size() << " subjects to " << fa.k << " folds\n";
    } else if (*pipeline) {
      auto cfg = parse_pipeline_config(read_text(pipe_config), pipe_config.parent_path());
      pipe_flags.apply(cfg.params);
      if (pipe_flags.connectivity) cfg.evaluation.connectivity = cfg.params.connectivity;
      cfg.params.validate();
      const auto outcome = run_pipeline(cfg, force, pipe_jobs);
      out << "processed " << outcome.processed << ", skipped " << outcome.skipped << ", failed "
          << outcome.failures.size() << "\n";
      for (const auto& [id, msg] : outcome.failures) err << id << ": " << msg << "\n";
      if (!outcome.failures.empty()) return kExitPartialFailure;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const nifti::NiftiError& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == nifti::ErrorKind::kRange ? kExitValidation : kExitIo;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace segfuse::cli
