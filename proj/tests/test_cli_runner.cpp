#include <filesystem>
#include <fstream>
#include <sstream>

#include "conicxray/errors.hpp"
#include "conicxray/runner.hpp"
#include "doctest.h"

using namespace conicxray;
namespace fs = std::filesystem;

namespace {

std::string file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const char* kTinyConfig = R"(
# exact cone over the unit sphere
seed = 7
[metric]
link = sphere
radius = 1.0
x0 = 0.5
[grid]
nx = 14
ny = 8
x_min = 0.11
x_top = 0.35
[operator]
h_list = 0.2
n_omega = 4
[solver]
max_iters = 4000
rtol = 1e-8
c_true = 1.0
threshold = 0.05
)";

}  // namespace

TEST_CASE("config parsing: minimal file, defaults, and errors") {
  const ExperimentConfig min = parse_config_text("[metric]\nlink = sphere\n[grid]\nnx = 8\nny = 4\n");
  CHECK(min.x0 == 0.5);          // documented default
  CHECK(min.h_list.size() == 1);  // default h
  CHECK(min.S == 4.0);

  CHECK_THROWS_AS(parse_config_text("[grid]\nnx = 8\n"), FormatError);  // [metric] missing
  CHECK_THROWS_WITH_AS(
      parse_config_text("[metric]\nlink = sphere\nradius = 1\nradius = 2\n[grid]\nnx=4\nny=4\n"),
      doctest::Contains("duplicate key 'radius'"), FormatError);
  CHECK_THROWS_WITH_AS(parse_config_text("[metric]\nwat = 3\n[grid]\nnx=4\nny=4\n"),
                       doctest::Contains("unknown key 'wat'"), FormatError);
  CHECK_THROWS_AS(parse_config_text("[metric]\nx0 = -1\n[grid]\nnx=4\nny=4\n"), FormatError);
  CHECK_THROWS_AS(parse_config_text("[metric]\nradius = abc\n[grid]\nnx=4\nny=4\n"), FormatError);
  CHECK_THROWS_AS(parse_config_text("[wat]\n[metric]\n[grid]\nnx=4\nny=4\n"), FormatError);
  CHECK_THROWS_AS(
      parse_config_text("[metric]\n[grid]\nnx=4\nny=4\n[solver]\nrtol = 0.5\n"), FormatError);
}

TEST_CASE("config builds the metric and operator objects") {
  ExperimentConfig cfg = parse_config_text(kTinyConfig);
  CHECK(cfg.seed == 7);
  const ConicMetric m = cfg.make_metric();
  CHECK(m.is_exact_cone());
  CHECK(m.x0() == 0.5);
  auto grid = cfg.make_grid(m);
  CHECK(grid->nx() == 14);
  CHECK(grid->x_top() == doctest::Approx(0.35));
  CHECK(cfg.make_weight().kind() == WeightSpec::Kind::OneCusp);
  CHECK(cfg.make_localizer().kind() == Localizer::Kind::Gaussian);

  ExperimentConfig warped = parse_config_text(
      "[metric]\nlink = sphere\nwarp_coeffs = 1.0\n[grid]\nnx = 8\nny = 4\n");
  CHECK_FALSE(warped.make_metric().is_exact_cone());
  CHECK(warped.make_metric().warp(0.2) == doctest::Approx(1.2));
}

TEST_CASE("certify subcommand writes artifacts and the manifest") {
  const ExperimentConfig cfg = parse_config_text(kTinyConfig);
  const fs::path out = "/tmp/conicxray_test_certify";
  fs::remove_all(out);
  const int code = run_subcommand("certify", cfg, out.string());
  CHECK(code == 0);
  CHECK(fs::exists(out / "certify.txt"));
  CHECK(fs::exists(out / "alphas.csv"));
  const std::string manifest = file_bytes(out / "manifest.txt");
  CHECK(manifest.find("config_hash=") != std::string::npos);
  CHECK(manifest.find("C5=") != std::string::npos);
  const std::string cert = file_bytes(out / "certify.txt");
  CHECK(cert.find("passes=1") != std::string::npos);
  CHECK(cert.find("link_conjugate=none") != std::string::npos);
}

TEST_CASE("invert runs are byte-identical for identical config and seed") {
  const ExperimentConfig cfg = parse_config_text(kTinyConfig);
  const fs::path out1 = "/tmp/conicxray_det_1", out2 = "/tmp/conicxray_det_2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  REQUIRE(run_subcommand("invert", cfg, out1.string()) == 0);
  REQUIRE(run_subcommand("invert", cfg, out2.string()) == 0);
  for (const char* name : {"f_rec.gfn", "residuals.csv", "invert_summary.txt", "manifest.txt"}) {
    CHECK(file_bytes(out1 / name) == file_bytes(out2 / name));
    CHECK(!file_bytes(out1 / name).empty());
  }
}

TEST_CASE("symbol subcommand fails with the broken localizer") {
  ExperimentConfig cfg = parse_config_text(kTinyConfig);
  cfg.localizer = "vanishing_center";
  const fs::path out = "/tmp/conicxray_test_symbol_bad";
  fs::remove_all(out);
  const int code = run_subcommand("symbol", cfg, out.string());
  CHECK(code == 2);
  CHECK(fs::exists(out / "symbol_scan.csv"));
}

TEST_CASE("unknown subcommand is an error") {
  const ExperimentConfig cfg = parse_config_text(kTinyConfig);
  CHECK_THROWS_AS(run_subcommand("wat", cfg, "/tmp/conicxray_wat"), ArgumentError);
}
