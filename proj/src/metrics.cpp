#include "segfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace segfuse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
  const auto da = a.data();
  const auto db = b.data();
  std::size_t n = 0;
  for (std::size_t i = 0; i < da.size(); ++i) n += (da[i] & db[i]);
  return n;
}

// Lower envelope of parabolas along one line (Felzenszwalb & Huttenlocher),
// with infinite entries treated as absent.
void transform_line(std::span<const double> f, std::span<double> out, double s2,
                    std::vector<std::int64_t>& v, std::vector<double>& z) {
  const auto n = static_cast<std::int64_t>(f.size());
  std::int64_t k = -1;
  auto intercept = [&](std::int64_t q, std::int64_t p) {
    const double fq = f[q] + s2 * static_cast<double>(q * q);
    const double fp = f[p] + s2 * static_cast<double>(p * p);
    return (fq - fp) / (2.0 * s2 * static_cast<double>(q - p));
  };
  for (std::int64_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    while (k >= 0) {
      const double s = intercept(q, v[k]);
      if (s <= z[k]) {
        --k;
      } else {
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
    }
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), kInf);
    return;
  }
  std::int64_t j = 0;
  for (std::int64_t p = 0; p < n; ++p) {
    while (z[j + 1] < static_cast<double>(p)) ++j;
    const double d = static_cast<double>(p - v[j]);
    out[p] = s2 * d * d + f[v[j]];
  }
}

// Copies the sub-block [lo, hi] (inclusive) of a mask into its own grid.
BinaryMask crop(const BinaryMask& m, const std::array<std::int64_t, 3>& lo,
                const std::array<std::int64_t, 3>& hi) {
  const Grid& g = m.grid();
  Grid sub({hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1}, g.spacing());
  std::vector<std::uint8_t> out(sub.voxel_count());
  for (std::int64_t z = 0; z < sub.nz(); ++z)
    for (std::int64_t y = 0; y < sub.ny(); ++y)
      for (std::int64_t x = 0; x < sub.nx(); ++x)
        out[sub.index(x, y, z)] = m.at(x + lo[0], y + lo[1], z + lo[2]);
  return BinaryMask(std::move(sub), std::move(out));
}

}  // namespace

double dice(const BinaryMask& pred, const BinaryMask& gt) {
  require_compatible(pred.grid(), gt.grid(), "dice");
  const std::size_t p = foreground_count(pred);
  const std::size_t g = foreground_count(gt);
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(intersection_count(pred, gt)) / static_cast<double>(p + g);
}

LesionCounts lesion_counts(const BinaryMask& pred, const BinaryMask& gt, Connectivity c) {
  require_compatible(pred.grid(), gt.grid(), "lesion_f1");
  const ComponentSet pc = label_components(pred, c);
  const ComponentSet gc = label_components(gt, c);
  std::vector<bool> gt_hit(gc.count + 1, false);
  std::vector<bool> pred_hit(pc.count + 1, false);
  const auto pl = pc.labels.data();
  const auto gl = gc.labels.data();
  for (std::size_t i = 0; i < pl.size(); ++i) {
    if (pl[i] != 0 && gl[i] != 0) {
      gt_hit[gl[i]] = true;
      pred_hit[pl[i]] = true;
    }
  }
  LesionCounts out;
  out.pred_components = pc.count;
  out.gt_components = gc.count;
  for (std::uint32_t k = 1; k <= gc.count; ++k) {
    (gt_hit[k] ? out.true_positives : out.false_negatives)++;
  }
  for (std::uint32_t k = 1; k <= pc.count; ++k) {
    if (!pred_hit[k]) ++out.false_positives;
  }
  return out;
}

double lesion_f1(const BinaryMask& pred, const BinaryMask& gt, Connectivity c) {
  const LesionCounts lc = lesion_counts(pred, gt, c);
  const std::size_t denom = 2 * lc.true_positives + lc.false_positives + lc.false_negatives;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(lc.true_positives) / static_cast<double>(denom);
}

std::size_t simple_lesion_count(const BinaryMask& pred, const BinaryMask& gt, Connectivity c) {
  require_compatible(pred.grid(), gt.grid(), "simple_lesion_count");
  const std::size_t p = label_components(pred, c).count;
  const std::size_t g = label_components(gt, c).count;
  return p > g ? p - g : g - p;
}

std::size_t volume_difference(const BinaryMask& pred, const BinaryMask& gt) {
  require_compatible(pred.grid(), gt.grid(), "volume_difference");
  const std::size_t p = foreground_count(pred);
  const std::size_t g = foreground_count(gt);
  return p > g ? p - g : g - p;
}

double volume_difference_mm3(const BinaryMask& pred, const BinaryMask& gt) {
  const auto& s = pred.grid().spacing();
  return static_cast<double>(volume_difference(pred, gt)) * s[0] * s[1] * s[2];
}

BinaryMask surface_voxels(const BinaryMask& m) {
  const Grid& g = m.grid();
  static constexpr int kFaces[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                       {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  std::vector<std::uint8_t> out(m.size(), 0);
  for (std::int64_t z = 0; z < g.nz(); ++z)
    for (std::int64_t y = 0; y < g.ny(); ++y)
      for (std::int64_t x = 0; x < g.nx(); ++x) {
        if (m.at(x, y, z) == 0) continue;
        for (const auto& f : kFaces) {
          const auto xx = x + f[0];
          const auto yy = y + f[1];
          const auto zz = z + f[2];
          if (!g.contains(xx, yy, zz) || m.at(xx, yy, zz) == 0) {
            out[g.index(x, y, z)] = 1;
            break;
          }
        }
      }
  return BinaryMask(g, std::move(out));
}

std::vector<double> distance_to_sites(const BinaryMask& sites) {
  const Grid& g = sites.grid();
  const auto& dims = g.dims();
  std::vector<double> d(sites.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = sites[i] != 0 ? 0.0 : kInf;

  const std::int64_t longest = std::max({dims[0], dims[1], dims[2]});
  std::vector<double> line(longest);
  std::vector<double> result(longest);
  std::vector<std::int64_t> v(longest);
  std::vector<double> z(longest + 1);
  const std::int64_t strides[3] = {1, dims[0], dims[0] * dims[1]};

  for (int axis = 0; axis < 3; ++axis) {
    const std::int64_t n = dims[axis];
    const std::int64_t stride = strides[axis];
    const double s2 = g.spacing()[axis] * g.spacing()[axis];
    const int a1 = (axis + 1) % 3;
    const int a2 = (axis + 2) % 3;
    for (std::int64_t j = 0; j < dims[a2]; ++j) {
      for (std::int64_t i = 0; i < dims[a1]; ++i) {
        const std::int64_t base = i * strides[a1] + j * strides[a2];
        for (std::int64_t t = 0; t < n; ++t) line[t] = d[base + t * stride];
        transform_line({line.data(), static_cast<std::size_t>(n)},
                       {result.data(), static_cast<std::size_t>(n)}, s2, v, z);
        for (std::int64_t t = 0; t < n; ++t) d[base + t * stride] = result[t];
      }
    }
  }
  for (double& x : d) x = std::sqrt(x);
  return d;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("percentile rank must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

std::optional<double> hausdorff_percentile(const BinaryMask& pred, const BinaryMask& gt, double q,
                                           HausdorffVariant variant) {
  require_compatible(pred.grid(), gt.grid(), "hausdorff");
  const Grid& g = pred.grid();

  // Every site and query voxel lies in the union's bounding box, so the
  // transform can run on that block alone.
  std::array<std::int64_t, 3> lo{g.nx(), g.ny(), g.nz()};
  std::array<std::int64_t, 3> hi{-1, -1, -1};
  bool pred_any = false;
  bool gt_any = false;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == 0 && gt[i] == 0) continue;
    pred_any = pred_any || pred[i] != 0;
    gt_any = gt_any || gt[i] != 0;
    const auto c = g.coords(i);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
    }
  }
  if (!pred_any || !gt_any) return std::nullopt;

  // Surfaces are taken on the full grid so the grid edge stays background.
  const BinaryMask ps = crop(surface_voxels(pred), lo, hi);
  const BinaryMask gs = crop(surface_voxels(gt), lo, hi);
  const auto to_gt = distance_to_sites(gs);
  const auto to_pred = distance_to_sites(ps);

  std::vector<double> pred_to_gt;
  std::vector<double> gt_to_pred;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i] != 0) pred_to_gt.push_back(to_gt[i]);
    if (gs[i] != 0) gt_to_pred.push_back(to_pred[i]);
  }
  if (variant == HausdorffVariant::kMaxOfDirected) {
    return std::max(percentile(std::move(pred_to_gt), q), percentile(std::move(gt_to_pred), q));
  }
  pred_to_gt.insert(pred_to_gt.end(), gt_to_pred.begin(), gt_to_pred.end());
  return percentile(std::move(pred_to_gt), q);
}

MetricReport evaluate_case(const BinaryMask& pred, const BinaryMask& gt,
                           const EvaluationOptions& options) {
  MetricReport r;
  r.dice = dice(pred, gt);
  const LesionCounts lc = lesion_counts(pred, gt, options.connectivity);
  const std::size_t denom = 2 * lc.true_positives + lc.false_positives + lc.false_negatives;
  r.lesion_f1 = denom == 0 ? 1.0
                           : 2.0 * static_cast<double>(lc.true_positives) /
                                 static_cast<double>(denom);
  r.pred_components = lc.pred_components;
  r.gt_components = lc.gt_components;
  r.slc = lc.pred_components > lc.gt_components ? lc.pred_components - lc.gt_components
                                                 : lc.gt_components - lc.pred_components;
  r.vd = options.vd_unit == VolumeUnit::kVoxels
             ? static_cast<double>(volume_difference(pred, gt))
             : volume_difference_mm3(pred, gt);
  r.hd95 = hausdorff95(pred, gt, options.hd_variant);
  return r;
}

MetricSummary summarize(std::vector<double> values) {
  MetricSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - s.mean) * (values[i] - s.mean);
  std::sort(sq.begin(), sq.end());
  double ss = 0.0;
  for (double v : sq) ss += v;
  s.std = std::sqrt(ss / static_cast<double>(values.size()));
  return s;
}

AggregateReport aggregate(std::span<const MetricReport> reports) {
  if (reports.empty()) throw ValidationError("aggregate needs at least one report");
  std::vector<double> dice_v, f1_v, slc_v, vd_v, hd_v;
  AggregateReport a;
  a.subjects = reports.size();
  for (const auto& r : reports) {
    dice_v.push_back(r.dice);
    f1_v.push_back(r.lesion_f1);
    slc_v.push_back(static_cast<double>(r.slc));
    vd_v.push_back(r.vd);
    if (r.hd95) {
      hd_v.push_back(*r.hd95);
    } else {
      ++a.hd95_undefined;
    }
  }
  a.dice = summarize(std::move(dice_v));
  a.lesion_f1 = summarize(std::move(f1_v));
  a.slc = summarize(std::move(slc_v));
  a.vd = summarize(std::move(vd_v));
  if (!hd_v.empty()) a.hd95 = summarize(std::move(hd_v));
  return a;
}

}  // namespace segfuse
