#include <doctest.h>

#include <cmath>
#include <thread>

#include "corpus.hpp"
#include "fixtures.hpp"
#include "segfuse/cli.hpp"
#include "test_support.hpp"

using namespace segfuse;
using namespace testing_support;
using corpus::run_cli;
using corpus::slurp;
namespace fs = std::filesystem;

namespace {

void write_map(const ProbabilityMap& p, const fs::path& path) {
  nifti::write_volume(p.as_scalar(), path, nifti::Datatype::kFloat32, nifti::has_gzip_suffix(path));
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("ensemble: one input keeps the float32 payload") {
  TempDir dir("cli");
  std::mt19937_64 rng(4);
  write_map(random_probability_map(rng, Grid({5, 4, 3})), dir / "a.nii");
  REQUIRE(run_cli({"ensemble", "-o", (dir / "mean.nii").string(), (dir / "a.nii").string()}) == 0);
  const auto in = slurp(dir / "a.nii");
  const auto out = slurp(dir / "mean.nii");
  CHECK(in.substr(352) == out.substr(352));
}

TEST_CASE("ensemble: four maps against an offline mean") {
  TempDir dir("cli");
  const Grid g({3, 2, 1});
  const std::vector<std::vector<float>> values{{0.0f, 0.25f, 0.5f, 1.0f, 0.125f, 0.75f},
                                               {1.0f, 0.25f, 0.5f, 0.0f, 0.375f, 0.75f},
                                               {0.5f, 0.75f, 0.5f, 1.0f, 0.625f, 0.25f},
                                               {0.5f, 0.75f, 0.5f, 0.0f, 0.875f, 0.25f}};
  std::vector<std::string> args{"ensemble", "-o", (dir / "mean.nii.gz").string()};
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto p = dir / ("m" + std::to_string(k) + ".nii.gz");
    write_map(ProbabilityMap(g, values[k]), p);
    args.push_back(p.string());
  }
  REQUIRE(run_cli(args) == 0);
  // Column sums / 4, all exact in binary: 2/4, 2/4, 2/4, 2/4, 2/4, 2/4.
  const auto mean = nifti::read_volume(dir / "mean.nii.gz");
  for (std::size_t i = 0; i < mean.size(); ++i) {
    double s = 0;
    for (const auto& v : values) s += v[i];
    CHECK(mean[i] == static_cast<float>(s / 4.0));
  }
}

TEST_CASE("ensemble: mismatched grids fail with a message") {
  TempDir dir("cli");
  write_map(ProbabilityMap(Grid({2, 2, 2}), std::vector<float>(8, 0.1f)), dir / "a.nii");
  write_map(ProbabilityMap(Grid({2, 2, 3}), std::vector<float>(12, 0.1f)), dir / "b.nii");
  std::string err;
  const int rc = run_cli({"ensemble", "-o", (dir / "m.nii").string(), (dir / "a.nii").string(),
                          (dir / "b.nii").string()},
                         nullptr, &err);
  CHECK(rc == cli::kExitValidation);
  CHECK(err.find("mismatch") != std::string::npos);
  CHECK(run_cli({"ensemble", "-o", (dir / "m.nii").string(), (dir / "missing.nii").string()}) ==
        cli::kExitIo);
}

TEST_CASE("postprocess: small-branch fixture") {
  TempDir dir("cli");
  write_map(fixtures::small_case_map(), dir / "p.nii.gz");
  REQUIRE(run_cli({"postprocess", "-i", (dir / "p.nii.gz").string(), "-m",
                   (dir / "mask.nii.gz").string(), "-r", (dir / "report.json").string()}) == 0);
  const auto mask = BinaryMask::from_scalar(nifti::read_volume(dir / "mask.nii.gz"));
  CHECK(foreground_count(mask) == 0);
  const auto report = read_json(dir / "report.json");
  CHECK(report["branch"] == "small");
  CHECK(report["components_before"] == 1);
  CHECK(report["components_after"] == 0);
  CHECK(report["removed_components"][0]["peak"] == 0.65);
  CHECK(report["removed_components"][0]["size"] == 20);
  CHECK(report["format_version"] == 1);
}

TEST_CASE("postprocess: parameter validation and overrides") {
  TempDir dir("cli");
  write_map(fixtures::small_case_map(), dir / "p.nii");
  const std::vector<std::string> base{"postprocess", "-i", (dir / "p.nii").string(), "-m",
                                      (dir / "m.nii").string(), "-r", (dir / "r.json").string()};
  std::string err;
  auto with = [&](std::vector<std::string> extra) {
    auto a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return run_cli(a, nullptr, &err);
  };
  CHECK(with({"--high-threshold", "0.4"}) == cli::kExitValidation);
  CHECK(err.find("high_threshold") != std::string::npos);
  CHECK(with({"--connectivity", "8"}) == cli::kExitValidation);

  // A lower floor keeps the 0.65 component; the config sets it, the flag wins.
  std::ofstream(dir / "cfg.json") << R"({"postprocess": {"min_peak_probability": 0.9}})";
  CHECK(with({"--config", (dir / "cfg.json").string(), "--min-peak-prob", "0.6"}) == 0);
  CHECK(read_json(dir / "r.json")["components_after"] == 1);
  CHECK(with({"--config", (dir / "cfg.json").string()}) == 0);
  CHECK(read_json(dir / "r.json")["components_after"] == 0);
}

TEST_CASE("evaluate: identity corpus, empty masks and missing pairs") {
  TempDir dir("cli");
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "gt");
  const auto a = box_mask({8, 8, 8}, {1, 1, 1}, {3, 3, 3});
  const auto b = mask_from_points({8, 8, 8}, {{0, 0, 0}, {6, 6, 6}});
  const BinaryMask empty(Grid({8, 8, 8}));
  nifti::write_mask(a, dir / "pred" / "a.nii.gz", true);
  nifti::write_mask(a, dir / "gt" / "a.nii.gz", true);
  nifti::write_mask(b, dir / "pred" / "b.nii.gz", true);
  nifti::write_mask(b, dir / "gt" / "b.nii.gz", true);
  nifti::write_mask(empty, dir / "pred" / "e.nii.gz", true);
  nifti::write_mask(empty, dir / "gt" / "e.nii.gz", true);
  std::ofstream(dir / "manifest.csv") << "subject_id,pred,gt\nb,b.nii.gz,b.nii.gz\na,a.nii.gz,a.nii.gz\n"
                                         "e,e.nii.gz,e.nii.gz\n";
  REQUIRE(run_cli({"evaluate", "--manifest", (dir / "manifest.csv").string(), "--pred-dir",
                   (dir / "pred").string(), "--gt-dir", (dir / "gt").string(), "--csv",
                   (dir / "m.csv").string(), "--json", (dir / "agg.json").string()}) == 0);
  CHECK(slurp(dir / "m.csv") ==
        "subject_id,dice,lesion_f1,slc,vd,hd95,pred_components,gt_components\n"
        "a,1,1,0,0,0,1,1\n"
        "b,1,1,0,0,0,2,2\n"
        "e,1,1,0,0,,0,0\n");
  const auto agg = read_json(dir / "agg.json");
  CHECK(agg["metrics"]["hd95"]["undefined"] == 1);
  CHECK(agg["metrics"]["hd95"]["count"] == 2);
  CHECK(agg["metrics"]["dice"]["mean"] == 1.0);

  std::ofstream(dir / "bad.csv") << "subject_id,pred,gt\na,a.nii.gz,a.nii.gz\nzz,zz.nii.gz,zz.nii.gz\n";
  std::string err;
  CHECK(run_cli({"evaluate", "--manifest", (dir / "bad.csv").string(), "--pred-dir",
                 (dir / "pred").string(), "--gt-dir", (dir / "gt").string(), "--csv",
                 (dir / "x.csv").string(), "--json", (dir / "x.json").string()},
                nullptr, &err) == cli::kExitIo);
  CHECK(err.find("zz") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "x.csv"));
}

TEST_CASE("evaluate: three-subject corpus against hand-computed aggregates") {
  TempDir dir("cli");
  const Dims d{6, 6, 6};
  const auto cube = box_mask(d, {1, 1, 1}, {2, 2, 2});
  const auto slab = box_mask(d, {1, 1, 1}, {2, 2, 1});
  const BinaryMask empty{Grid(d)};
  const auto dot = mask_from_points(d, {{4, 4, 4}});
  // s1: perfect. s2: cube vs bottom slab. s3: missed single voxel.
  nifti::write_mask(cube, dir / "s1_p.nii", false);
  nifti::write_mask(cube, dir / "s1_g.nii", false);
  nifti::write_mask(cube, dir / "s2_p.nii", false);
  nifti::write_mask(slab, dir / "s2_g.nii", false);
  nifti::write_mask(empty, dir / "s3_p.nii", false);
  nifti::write_mask(dot, dir / "s3_g.nii", false);
  std::ofstream(dir / "m.csv") << "subject_id,pred,gt\ns1,s1_p.nii,s1_g.nii\ns2,s2_p.nii,s2_g.nii\n"
                                  "s3,s3_p.nii,s3_g.nii\n";
  REQUIRE(run_cli({"evaluate", "--manifest", (dir / "m.csv").string(), "--pred-dir", dir.path().string(),
                   "--gt-dir", dir.path().string(), "--csv", (dir / "o.csv").string(), "--json",
                   (dir / "o.json").string(), "--jobs", "3"}) == 0);
  const auto m = read_json(dir / "o.json")["metrics"];
  // dice {1, 2/3, 0}; L-F1 {1, 1, 0}; SLC {0, 0, 1}; VD {0, 4, 1}; 95HD {0, 1, undefined}.
  CHECK(m["dice"]["mean"].get<double>() == doctest::Approx(5.0 / 9.0).epsilon(1e-12));
  CHECK(m["dice"]["std"].get<double>() == doctest::Approx(std::sqrt(14.0) / 9.0).epsilon(1e-12));
  CHECK(m["lesion_f1"]["mean"].get<double>() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m["lesion_f1"]["std"].get<double>() == doctest::Approx(std::sqrt(2.0) / 3.0).epsilon(1e-12));
  CHECK(m["slc"]["mean"].get<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(m["vd"]["mean"].get<double>() == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
  CHECK(m["vd"]["std"].get<double>() == doctest::Approx(std::sqrt(26.0) / 3.0).epsilon(1e-12));
  CHECK(m["hd95"]["mean"].get<double>() == 0.5);
  CHECK(m["hd95"]["std"].get<double>() == 0.5);
  CHECK(m["hd95"]["undefined"] == 1);
}

TEST_CASE("split: deterministic fold CSV and summary") {
  TempDir dir("cli");
  {
    std::ofstream c(dir / "cohort.csv");
    c << "subject_id,lesion_volume\n";
    for (int i = 1; i <= 10; ++i) c << "sub-" << i << "," << i << "\n";
  }
  auto run_split = [&](const std::string& tag, const std::string& jobs) {
    return run_cli({"split", "-i", (dir / "cohort.csv").string(), "-k", "5", "--seed", "7", "-o",
                    (dir / (tag + ".csv")).string(), "--summary", (dir / (tag + ".json")).string(),
                    "--jobs", jobs});
  };
  REQUIRE(run_split("a", "1") == 0);
  REQUIRE(run_split("b", "8") == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  const auto summary = read_json(dir / "a.json");
  CHECK(summary["folds"].size() == 5);
  for (const auto& f : summary["folds"]) CHECK(f["count"] == 2);

  std::ofstream(dir / "dup.csv") << "subject_id,lesion_volume\nx,1\nx,2\ny,3\n";
  CHECK(run_cli({"split", "-i", (dir / "dup.csv").string(), "-k", "2", "-o", (dir / "d.csv").string()}) ==
        cli::kExitValidation);
  std::ofstream(dir / "neg.csv") << "subject_id,lesion_volume\nx,-1\ny,3\n";
  CHECK(run_cli({"split", "-i", (dir / "neg.csv").string(), "-k", "2", "-o", (dir / "d.csv").string()}) ==
        cli::kExitValidation);
}

TEST_CASE("pipeline: composition, resume and partial failure") {
  TempDir dir("cli");
  const auto c = corpus::make(dir.path());
  REQUIRE(run_cli({"pipeline", "--config", c.config.string(), "--jobs", "2"}) == 0);
  REQUIRE(corpus::run_manual_chain(c, dir / "manual") == 0);
  const auto piped = corpus::output_files(c, dir / "out");
  const auto manual = corpus::output_files(c, dir / "manual");
  for (std::size_t i = 0; i < piped.size(); ++i) {
    CAPTURE(piped[i]);
    CHECK(slurp(piped[i]) == slurp(manual[i]));
  }
  const auto csv = slurp(dir / "out" / "metrics.csv");
  CHECK(csv.find("sub-1,") != std::string::npos);

  // Resume: nothing is rewritten.
  std::vector<fs::file_time_type> stamps;
  for (const auto& f : piped) stamps.push_back(fs::last_write_time(f));
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  std::string out;
  REQUIRE(run_cli({"pipeline", "--config", c.config.string()}, &out) == 0);
  CHECK(out.find("skipped 3") != std::string::npos);
  for (std::size_t i = 0; i < piped.size(); ++i) CHECK(fs::last_write_time(piped[i]) == stamps[i]);

  // --force recomputes identical bytes.
  const auto before = slurp(piped[0]);
  REQUIRE(run_cli({"pipeline", "--config", c.config.string(), "--force"}, &out) == 0);
  CHECK(out.find("processed 3") != std::string::npos);
  CHECK(slurp(piped[0]) == before);

  // A missing scheme map fails only its subject.
  fs::remove(c.maps[1][2]);
  std::string err;
  CHECK(run_cli({"pipeline", "--config", c.config.string(), "--force"}, &out, &err) ==
        cli::kExitPartialFailure);
  CHECK(err.find("sub-2") != std::string::npos);
  CHECK(out.find("processed 2") != std::string::npos);
}

TEST_CASE("pipeline config validation") {
  TempDir dir("cli");
  std::ofstream(dir / "bad.json") << R"({"output_dir": "o", "subjects": [{"id": "../x", "maps": ["a"]}]})";
  CHECK(run_cli({"pipeline", "--config", (dir / "bad.json").string()}) == cli::kExitValidation);
  std::ofstream(dir / "bad2.json") << R"({"output_dir": "o", "postprocess": {"base_threshold": 0.6, "high_threshold": 0.55}, "subjects": []})";
  CHECK(run_cli({"pipeline", "--config", (dir / "bad2.json").string()}) == cli::kExitValidation);
  CHECK(run_cli({"pipeline", "--config", (dir / "missing.json").string()}) == cli::kExitIo);
  CHECK(run_cli({"nonsense"}) == cli::kExitValidation);
}
