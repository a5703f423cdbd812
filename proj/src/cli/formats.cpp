#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "segfuse/cli.hpp"

namespace segfuse::cli {

using nlohmann::ordered_json;

namespace {

template <typename T>
std::string shortest(T v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// JSON number holding the shortest decimal of a float, so 0.65f prints as
// 0.65 rather than its exact double expansion.
double float_for_json(float v) {
  const std::string s = shortest(v);
  double d = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), d);
  return d;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

ordered_json summary_json(const MetricSummary& s) {
  return ordered_json{{"mean", s.mean}, {"std", s.std}, {"count", s.count}};
}

}  // namespace

std::string format_number(double v) { return shortest(v); }
std::string format_number(float v) { return shortest(v); }

std::string postprocess_report_json(const PostprocessReport& report) {
  ordered_json removed = ordered_json::array();
  for (const auto& r : report.removed_components) {
    removed.push_back({{"id", r.id}, {"size", r.size}, {"peak", float_for_json(r.peak)}});
  }
  ordered_json j{{"format_version", kFormatVersion},
                 {"branch", to_string(report.branch)},
                 {"components_before", report.components_before},
                 {"components_after", report.components_after},
                 {"removed_components", removed},
                 {"foreground_before", report.foreground_before},
                 {"foreground_after", report.foreground_after}};
  return j.dump(2) + "\n";
}

std::string metrics_csv(std::span<const CaseResult> rows) {
  std::string out = "subject_id,dice,lesion_f1,slc,vd,hd95,pred_components,gt_components\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out += r.subject_id + ',' + format_number(m.dice) + ',' + format_number(m.lesion_f1) + ',' +
           std::to_string(m.slc) + ',' + format_number(m.vd) + ',' +
           (m.hd95 ? format_number(*m.hd95) : std::string()) + ',' +
           std::to_string(m.pred_components) + ',' + std::to_string(m.gt_components) + '\n';
  }
  return out;
}

std::string aggregate_json(const AggregateReport& agg, const EvaluationOptions& options) {
  ordered_json hd = agg.hd95 ? summary_json(*agg.hd95)
                             : ordered_json{{"mean", nullptr}, {"std", nullptr}, {"count", 0}};
  hd["undefined"] = agg.hd95_undefined;
  ordered_json j{
      {"format_version", kFormatVersion},
      {"subjects", agg.subjects},
      {"connectivity", static_cast<int>(options.connectivity)},
      {"hd95_variant",
       options.hd_variant == HausdorffVariant::kPooled ? "pooled" : "max_of_directed"},
      {"vd_units", options.vd_unit == VolumeUnit::kVoxels ? "voxels" : "mm3"},
      {"metrics",
       {{"dice", summary_json(agg.dice)},
        {"lesion_f1", summary_json(agg.lesion_f1)},
        {"slc", summary_json(agg.slc)},
        {"vd", summary_json(agg.vd)},
        {"hd95", hd}}}};
  return j.dump(2) + "\n";
}

std::string folds_csv(const FoldAssignment& fa) {
  std::string out = "subject_id,fold\n";
  for (const auto& [id, fold] : fa.fold_of) out += id + ',' + std::to_string(fold) + '\n';
  return out;
}

std::string fold_summary_json(const FoldAssignment& fa, std::span<const FoldSummary> summary) {
  ordered_json folds = ordered_json::array();
  for (const auto& s : summary) {
    folds.push_back({{"fold", s.fold},
                     {"count", s.count},
                     {"mean_volume", s.mean_volume},
                     {"median_volume", s.median_volume}});
  }
  ordered_json j{{"format_version", kFormatVersion}, {"k", fa.k}, {"seed", fa.seed}, {"folds", folds}};
  return j.dump(2) + "\n";
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ValidationError("CSV is missing column '" + name + "'");
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) throw ValidationError(path.string() + " has no header row");
  return t;
}

std::vector<SubjectRecord> read_cohort_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const auto id_col = t.column("subject_id");
  const auto vol_col = t.column("lesion_volume");
  std::vector<SubjectRecord> out;
  for (const auto& row : t.rows) {
    SubjectRecord r;
    r.subject_id = row[id_col];
    if (r.subject_id.empty()) throw ValidationError("empty subject_id in " + path.string());
    const auto& v = row[vol_col];
    const auto res = std::from_chars(v.data(), v.data() + v.size(), r.lesion_volume);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
      throw ValidationError("lesion_volume '" + v + "' for '" + r.subject_id +
                            "' is not a non-negative integer");
    }
    out.push_back(std::move(r));
  }
  return out;
}

bool write_file_if_changed(const fs::path& path, std::string_view content) {
  {
    std::ifstream in(path, std::ios::binary);
    if (in) {
      const std::string existing((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      if (existing == content) return false;
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("short write to " + path.string());
  return true;
}

}  // namespace segfuse::cli
