#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sdmtl/cli.hpp"
#include "sdmtl/gradsuite.hpp"

using namespace sdmtl;

namespace {

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"sdmtl"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  int n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("key=value config parsing with comments") {
  const auto path = std::filesystem::temp_directory_path() / "sdmtl_cfg.txt";
  {
    std::ofstream out(path);
    out << "# model\n"
           "t = 6\n"
           "t_out=4   # horizon\n"
           "c = 8\n"
           "\n"
           "lr = 0.002\n"
           "loss = linear\n"
           "ablate = ted, rc\n";
  }
  TrainConfig cfg;
  apply_config_file(cfg, parse_key_value_file(path));
  CHECK(cfg.hyper.t == 6);
  CHECK(cfg.hyper.t_out == 4);
  CHECK(cfg.hyper.c == 8);
  CHECK(cfg.lr == doctest::Approx(0.002f));
  CHECK(cfg.loss_variant == WeightVariant::linear);
  CHECK(cfg.hyper.ted_off);
  CHECK(cfg.hyper.rc_off);
  CHECK_FALSE(cfg.hyper.amg_off);
}

TEST_CASE("unknown config keys are rejected by name") {
  const auto path = std::filesystem::temp_directory_path() / "sdmtl_badcfg.txt";
  {
    std::ofstream out(path);
    out << "t = 6\nlearning_rate = 0.1\n";
  }
  TrainConfig cfg;
  try {
    apply_config_file(cfg, parse_key_value_file(path));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
  }
}

TEST_CASE("malformed config values name the key") {
  TrainConfig cfg;
  CHECK_THROWS_AS(apply_config_file(cfg, {{"steps", "many"}}), ConfigError);
  CHECK_THROWS_AS(apply_config_file(cfg, {{"loss", "square"}}), ConfigError);
  CHECK_THROWS_AS(apply_config_file(cfg, {{"ablate", "bn"}}), ConfigError);
}

TEST_CASE("cli pipeline: synth, train, eval, predict") {
  const auto dir = temp_dir("sdmtl_cli_e2e");
  const auto data = (dir / "data").string();
  const auto ckpt = (dir / "model.ckpt").string();
  const auto cfg_path = dir / "train.cfg";
  {
    std::ofstream out(cfg_path);
    out << "t = 6\nt_out = 4\nc = 8\nsteps = 30\nbatch = 4\nlr = 0.002\n";
  }

  CHECK(cli({"synth", "--out", data, "--sequences", "12", "--frames", "30", "--joints", "5",
             "--seed", "3"}) == 0);
  CHECK(std::filesystem::exists(data + "/seq_0000.csv"));
  CHECK(std::filesystem::exists(data + "/seq_0011.csv"));
  CHECK(std::filesystem::exists(data + "/manifest.json"));

  CHECK(cli({"train", "--config", cfg_path.string(), "--data", data, "--out", ckpt, "--seed", "1",
             "--quiet"}) == 0);
  CHECK(std::filesystem::exists(ckpt));
  CHECK(count_lines(ckpt + ".loss.csv") == 31);  // header + 30 steps

  const auto metrics = (dir / "metrics.csv").string();
  CHECK(cli({"eval", "--ckpt", ckpt, "--data", data, "--split", "test", "--horizons-ms", "80,160",
             "--out", metrics}) == 0);
  REQUIRE(std::filesystem::exists(metrics));
  CHECK(count_lines(metrics) == 3);
  {
    std::ifstream in(metrics);
    std::string header;
    std::getline(in, header);
    CHECK(header == "ms,frame,model_mpjpe,zero_velocity_mpjpe,constant_velocity_mpjpe");
  }

  // unreachable horizon names the valid ones and exits with a usage error
  CHECK(cli({"eval", "--ckpt", ckpt, "--data", data, "--horizons-ms", "400"}) == 1);

  const auto pred = (dir / "pred.csv").string();
  CHECK(cli({"predict", "--ckpt", ckpt, "--input", data + "/seq_0000.csv", "--out", pred}) == 0);
  CHECK(count_lines(pred) == 5);  // header + t_out rows
  {
    std::ifstream in(pred);
    std::string header;
    std::getline(in, header);
    CHECK(header.substr(0, 9) == "j0_x,j0_y");
  }

  // eval twice produces identical bytes (determinism)
  const auto metrics2 = (dir / "metrics2.csv").string();
  CHECK(cli({"eval", "--ckpt", ckpt, "--data", data, "--split", "test", "--horizons-ms", "80,160",
             "--out", metrics2}) == 0);
  CHECK(file_bytes(metrics) == file_bytes(metrics2));
}

TEST_CASE("cli maps error families to exit codes") {
  const auto dir = temp_dir("sdmtl_cli_err");
  // usage: missing required option
  CHECK(cli({"train", "--data", dir.string()}) == 1);
  // data: missing dataset directory
  CHECK(cli({"train", "--data", (dir / "nosuch").string(), "--out", (dir / "x.ckpt").string(),
             "--quiet"}) == 2);
  // parse: corrupted checkpoint
  const auto bad = dir / "bad.ckpt";
  {
    std::ofstream out(bad, std::ios::binary);
    out << "garbage";
  }
  CHECK(cli({"eval", "--ckpt", bad.string(), "--data", dir.string()}) == 2);
}

TEST_CASE("gradient suite is deterministic per seed") {
  const auto a = run_grad_suite(7);
  const auto b = run_grad_suite(7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].component == b[i].component);
    CHECK(a[i].report.max_rel_err == b[i].report.max_rel_err);
    CHECK(a[i].report.coords_checked == b[i].report.coords_checked);
    CHECK(a[i].report.worst_coord == b[i].report.worst_coord);
  }
}
