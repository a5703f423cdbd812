#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "segfuse/components.hpp"
#include "segfuse/volume.hpp"

namespace segfuse {

/// 2|P∩G| / (|P|+|G|); 1 when both masks are empty.
double dice(const BinaryMask& pred, const BinaryMask& gt);

struct LesionCounts {
  std::size_t true_positives = 0;   // gt components touched by prediction
  std::size_t false_negatives = 0;  // gt components missed
  std::size_t false_positives = 0;  // predicted components touching no gt voxel
  std::size_t pred_components = 0;
  std::size_t gt_components = 0;
};

LesionCounts lesion_counts(const BinaryMask& pred, const BinaryMask& gt, Connectivity c);

/// 2TP / (2TP + FP + FN) over connected components; 1 when there are none.
double lesion_f1(const BinaryMask& pred, const BinaryMask& gt, Connectivity c);

/// |#components(pred) - #components(gt)|.
std::size_t simple_lesion_count(const BinaryMask& pred, const BinaryMask& gt, Connectivity c);

/// |foreground(pred) - foreground(gt)| in voxels.
std::size_t volume_difference(const BinaryMask& pred, const BinaryMask& gt);
double volume_difference_mm3(const BinaryMask& pred, const BinaryMask& gt);

/// Foreground voxels with at least one background face neighbour; voxels
/// outside the grid count as background.
BinaryMask surface_voxels(const BinaryMask& m);

/// Exact Euclidean distance in mm from every voxel centre to the nearest
/// site voxel. Infinity everywhere when there are no sites.
std::vector<double> distance_to_sites(const BinaryMask& sites);

enum class HausdorffVariant {
  kPooled,         // percentile of both directed distance sets merged
  kMaxOfDirected,  // max of the two directed percentiles
};

/// Linear interpolation between closest ranks: position q·(n-1) in the
/// sorted sample. `q` in [0, 1].
double percentile(std::vector<double> values, double q);

/// Percentile of surface-to-surface distances in mm; nullopt when either
/// mask is empty.
std::optional<double> hausdorff_percentile(const BinaryMask& pred, const BinaryMask& gt, double q,
                                           HausdorffVariant variant = HausdorffVariant::kPooled);

inline std::optional<double> hausdorff95(const BinaryMask& pred, const BinaryMask& gt,
                                         HausdorffVariant variant = HausdorffVariant::kPooled) {
  return hausdorff_percentile(pred, gt, 0.95, variant);
}

enum class VolumeUnit { kVoxels, kCubicMillimetres };

struct EvaluationOptions {
  Connectivity connectivity = Connectivity::k26;
  HausdorffVariant hd_variant = HausdorffVariant::kPooled;
  VolumeUnit vd_unit = VolumeUnit::kVoxels;
};

struct MetricReport {
  double dice = 0.0;
  double lesion_f1 = 0.0;
  std::size_t slc = 0;
  double vd = 0.0;
  std::optional<double> hd95;
  std::size_t pred_components = 0;
  std::size_t gt_components = 0;
};

MetricReport evaluate_case(const BinaryMask& pred, const BinaryMask& gt,
                           const EvaluationOptions& options = {});

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t count = 0;
};

struct AggregateReport {
  std::size_t subjects = 0;
  MetricSummary dice;
  MetricSummary lesion_f1;
  MetricSummary slc;
  MetricSummary vd;
  std::optional<MetricSummary> hd95;  // over defined values only
  std::size_t hd95_undefined = 0;
};

/// Mean and population standard deviation per metric. Values are sorted
/// before reduction so the result does not depend on report order.
MetricSummary summarize(std::vector<double> values);
AggregateReport aggregate(std::span<const MetricReport> reports);

}  // namespace segfuse
