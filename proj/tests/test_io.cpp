#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "ubu/io.hpp"

using namespace ubu;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path p = fs::temp_directory_path() / "ubu_io_test";
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

std::string gaussian_config_json(const std::string& out_dir, int d = 4) {
  std::ostringstream os;
  os << R"({
  "id": "toy",
  "seed": 5,
  "output_dir": ")" << out_dir << R"(",
  "model": {"kind": "gaussian", "d": )" << d << R"(, "kappa": 4.0},
  "sampler": {"method": "ububu", "h0": 0.4, "K": 30, "N": 8, "B0": 20, "B": 8},
  "diagnostics": {"test_functions": ["coords", "norm_sq"], "runs": 3, "n_boot": 200}
})";
  return os.str();
}

void be32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  buf.push_back(v >> 24);
  buf.push_back((v >> 16) & 0xff);
  buf.push_back((v >> 8) & 0xff);
  buf.push_back(v & 0xff);
}

// Four 28x28 images with a constant fill value per image.
void write_idx_fixture(const fs::path& images, const fs::path& labels) {
  std::vector<std::uint8_t> im;
  be32(im, 0x00000803u);
  be32(im, 4);
  be32(im, 28);
  be32(im, 28);
  for (int i = 0; i < 4; ++i)
    for (int p = 0; p < 28 * 28; ++p)
      im.push_back(static_cast<std::uint8_t>(i == 3 ? 255 : 60 * i));
  std::ofstream(images, std::ios::binary)
      .write(reinterpret_cast<const char*>(im.data()), im.size());
  std::vector<std::uint8_t> lb;
  be32(lb, 0x00000801u);
  be32(lb, 4);
  for (std::uint8_t v : {0, 1, 2, 9}) lb.push_back(v);
  std::ofstream(labels, std::ios::binary)
      .write(reinterpret_cast<const char*>(lb.data()), lb.size());
}

std::string strip_wall_time(const fs::path& results_csv) {
  std::ifstream in(results_csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') {
      // Drop the second-to-last comma-separated field (wall_time).
      const std::size_t last = line.rfind(',');
      const std::size_t prev = line.rfind(',', last - 1);
      line = line.substr(0, prev) + line.substr(last);
    }
    out << line << "\n";
  }
  return out.str();
}

}  // namespace

TEST_CASE("config loading validates fields and rejects unknown keys") {
  const fs::path dir = temp_dir();
  const fs::path cfg_path = dir / "cfg.json";
  write_file(cfg_path, gaussian_config_json((dir / "out").string()));
  const ExperimentConfig cfg = load_experiment_config(cfg_path.string());
  CHECK(cfg.model.kind == "gaussian");
  CHECK(cfg.sampler.run.K == 30);
  CHECK(cfg.seed == 5);

  write_file(cfg_path, R"({"id": "x", "bogus": 1, "model": {"kind": "gaussian"},
                           "sampler": {"method": "ububu"}})");
  CHECK_THROWS_WITH_AS(load_experiment_config(cfg_path.string()),
                       doctest::Contains("bogus"), ConfigError);

  write_file(cfg_path, R"({"model": {"kind": "gaussian"},
                           "sampler": {"method": "ububu", "c_R": 0.9}})");
  CHECK_THROWS_WITH_AS(load_experiment_config(cfg_path.string()),
                       doctest::Contains("c_R"), ConfigError);

  write_file(cfg_path, R"({"model": {"kind": "gaussian", "kappa": 0.5},
                           "sampler": {"method": "ububu"}})");
  CHECK_THROWS_WITH_AS(load_experiment_config(cfg_path.string()),
                       doctest::Contains("kappa"), ConfigError);
}

TEST_CASE("mode-specific sampler defaults") {
  const fs::path dir = temp_dir();
  const fs::path cfg_path = dir / "cfg_sg.json";
  write_file(cfg_path, R"({"model": {"kind": "multinomial"},
                           "sampler": {"method": "ububu-approx"}})");
  const ExperimentConfig cfg = load_experiment_config(cfg_path.string());
  CHECK(cfg.sampler.run.mode == GradientMode::Approx);
  CHECK(cfg.sampler.run.c_N == doctest::Approx(1.0 / 64.0));
  CHECK(cfg.sampler.run.phi_N == doctest::Approx(2.0 * std::sqrt(2.0)));
  CHECK(cfg.sampler.run.c_R == doctest::Approx(0.5));
  CHECK(cfg.sampler.run.tau == 40);
}

TEST_CASE("idx ingestion parses, pools and round-trips") {
  const fs::path dir = temp_dir();
  write_idx_fixture(dir / "im.idx", dir / "lb.idx");
  const MnistData data = ingest_mnist((dir / "im.idx").string(), (dir / "lb.idx").string(),
                                      10, 4);
  CHECK(data.rows == 28);
  CHECK(data.cols == 28);
  CHECK(data.X.rows() == 4);
  CHECK(data.X.cols() == 50);  // 7x7 pooled pixels + intercept
  CHECK(data.labels == std::vector<int>{1, 2, 3, 10});
  CHECK(data.X(3, 0) == doctest::Approx(1.0));  // pixel 255 scales to exactly 1
  CHECK(data.X(0, 0) == doctest::Approx(0.0));
  CHECK(data.X(1, 48) == doctest::Approx(60.0 / 255.0));
  CHECK(data.X(2, 49) == doctest::Approx(1.0));  // intercept

  write_mnist((dir / "im2.idx").string(), (dir / "lb2.idx").string(), data);
  const MnistData again = ingest_mnist((dir / "im2.idx").string(),
                                       (dir / "lb2.idx").string(), 10, 4);
  CHECK(dataset_hash(data) == dataset_hash(again));

  // Magic mismatch.
  write_file(dir / "bad.idx", "not an idx file");
  CHECK_THROWS_AS(ingest_mnist((dir / "bad.idx").string(), (dir / "lb.idx").string(), 4, 1),
                  ConfigError);
}

TEST_CASE("match csv ingestion and round trip") {
  const fs::path dir = temp_dir();
  const fs::path csv = dir / "m.csv";
  write_file(csv, "round,home,away,hg,ag\n1,ars,che,2,1\n1,liv,tot,0,0\n2,che,ars,3,2\n");
  const MatchData data = ingest_matches(csv.string());
  CHECK(data.n_teams == 4);
  CHECK(data.n_weeks == 2);
  CHECK(data.games.size() == 3);
  CHECK(data.games[2].home == 1);  // che appeared second
  write_matches((dir / "m2.csv").string(), data);
  const MatchData again = ingest_matches((dir / "m2.csv").string());
  CHECK(dataset_hash(data) == dataset_hash(again));

  write_file(csv, "round,home,away,hg,ag\n1,a,a,1,1\n");
  CHECK_THROWS_WITH_AS(ingest_matches(csv.string()), doctest::Contains("itself"),
                       ConfigError);
  write_file(csv, "round,home,away,hg,ag\n1,a,b,-1,0\n");
  CHECK_THROWS_WITH_AS(ingest_matches(csv.string()), doctest::Contains("negative"),
                       ConfigError);
  write_file(csv, "round,home,away,hg,ag\n1,a,b,x,0\n");
  CHECK_THROWS_WITH_AS(ingest_matches(csv.string()), doctest::Contains("row 2"),
                       ConfigError);
  write_file(csv, "wrong,header\n");
  CHECK_THROWS_AS(ingest_matches(csv.string()), ConfigError);
}

TEST_CASE("run command writes the result schema and is deterministic") {
  const fs::path dir = temp_dir();
  const fs::path out1 = dir / "run1";
  const fs::path out2 = dir / "run2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  const fs::path cfg_path = dir / "run_cfg.json";

  write_file(cfg_path, gaussian_config_json(out1.string()));
  ExperimentConfig cfg = load_experiment_config(cfg_path.string());
  CHECK(cmd_run(cfg) == 0);
  REQUIRE(fs::exists(out1 / "results.csv"));
  REQUIRE(fs::exists(out1 / "dlevels.csv"));

  std::ifstream in(out1 / "results.csv");
  std::string line;
  int data_rows = 0;
  bool saw_norm = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("experiment,", 0) == 0) continue;
    ++data_rows;
    if (line.find(",norm_sq,") != std::string::npos) saw_norm = true;
  }
  CHECK(data_rows == 5);  // 4 coordinates + norm row
  CHECK(saw_norm);

  // Rerun with a different thread cap: byte-identical apart from wall time.
  cfg.output_dir = out2.string();
  cfg.sampler.run.threads = 3;
  CHECK(cmd_run(cfg) == 0);
  CHECK(strip_wall_time(out1 / "results.csv") == strip_wall_time(out2 / "results.csv"));
  std::ifstream d1(out1 / "dlevels.csv"), d2(out2 / "dlevels.csv");
  std::stringstream s1, s2;
  s1 << d1.rdbuf();
  s2 << d2.rdbuf();
  CHECK(s1.str() == s2.str());
}

TEST_CASE("ess report aggregates result files") {
  const fs::path dir = temp_dir();
  const fs::path run_dir = dir / "run1";  // produced by the previous test
  REQUIRE(fs::exists(run_dir / "results.csv"));
  const fs::path rep_dir = dir / "report";
  fs::remove_all(rep_dir);
  CHECK(cmd_ess_report(run_dir.string(), rep_dir.string(), 200) == 0);
  CHECK(fs::exists(rep_dir / "ess_histogram.csv"));
  std::ifstream sum(rep_dir / "ess_summary.csv");
  std::string header, row;
  std::getline(sum, header);
  REQUIRE(std::getline(sum, row));
  CHECK(row.rfind("ububu,", 0) == 0);

  CHECK_THROWS_AS(cmd_ess_report((dir / "nowhere").string(), rep_dir.string(), 50),
                  ConfigError);
}
