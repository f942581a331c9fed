#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "echopipe/checkpoint.hpp"
#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args, const fs::path& log, const std::string& env = "") {
  const std::string cmd = env + " \"" + std::string(ECHOPIPE_CLI_PATH) + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("cli: usage errors exit 2, help exits 0") {
  testing::TempDir dir("cli");
  CHECK(cli("--help", dir / "log").code == 0);
  CHECK(cli("", dir / "log").code == 2);
  CHECK(cli("train --bogus-flag", dir / "log").code == 2);
  CHECK(cli("frobnicate", dir / "log").code == 2);
  CHECK(cli("synth --patients 0", dir / "log").code == 2);
  const auto bad_seed = cli("synth --out \"" + (dir / "s").string() + "\"", dir / "log", "ECHOPIPE_SEED=banana");
  CHECK(bad_seed.code == 2);
}

TEST_CASE("cli: selfcheck passes") {
  testing::TempDir dir("cli");
  const auto r = cli("selfcheck", dir / "log");
  CHECK(r.code == 0);
  CHECK(r.output.find("PASS") != std::string::npos);
  CHECK(r.output.find("FAIL") == std::string::npos);
}

TEST_CASE("cli: synth, train and explain end to end") {
  testing::TempDir dir("cli");
  const std::string data = (dir / "data").string();
  auto r = cli("synth --patients 30 --frames 14 --size 48 --seed 1 --out \"" + data + "\"", dir / "log");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(r.output.find("seed=1") != std::string::npos);
  REQUIRE(fs::exists(dir / "data" / "manifest.tsv"));
  CHECK(fs::exists(dir / "data" / "run_config.synth.json"));

  // ECHOPIPE_SEED fills in when --seed is absent.
  r = cli("synth --patients 30 --frames 14 --size 48 --out \"" + (dir / "data2").string() + "\"", dir / "log",
          "ECHOPIPE_SEED=1");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(r.output.find("seed=1") != std::string::npos);

  const std::string model = (dir / "model").string();
  r = cli("train --manifest \"" + data + "/manifest.tsv\" --view PSAX_P --epochs 2 --width 0.125 --size 16 --seed 3 --out \"" +
              model + "\"",
          dir / "log");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  REQUIRE(fs::exists(dir / "model" / "model.ckpt"));
  const auto loaded = echopipe::load_checkpoint(dir / "model" / "model.ckpt", 3);
  CHECK(loaded.meta.view == "PSAX_P");
  CHECK(loaded.meta.seed == 3);
  const auto history = read_json(dir / "model" / "history.json");
  CHECK(history.at("epochs").size() == 2);
  CHECK(history.contains("selected_epoch"));
  CHECK(history.contains("batch_losses"));
  for (const auto& e : history.at("epochs")) CHECK(e.contains("train_loss"));

  r = cli("train --manifest \"" + data + "/manifest.tsv\" --view NOPE --out \"" + model + "\"", dir / "log");
  CHECK(r.code == 2);

  const std::string ex = (dir / "explain").string();
  r = cli("explain --checkpoint \"" + model + "/model.ckpt\" --manifest \"" + data + "/manifest.tsv\" --out \"" + ex + "\"",
          dir / "log");
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto summary = read_json(dir / "explain" / "explain.json");
  CHECK_FALSE(summary.empty());
  std::size_t overlays = 0;
  for (const auto& entry : fs::directory_iterator(dir / "explain")) {
    overlays += entry.path().string().find(".overlay.echo") != std::string::npos;
  }
  CHECK(overlays > 0);

  r = cli("explain --checkpoint \"" + model + "/model.ckpt\" --manifest \"" + data + "/manifest.tsv\" --class 7 --out \"" +
              ex + "\"",
          dir / "log");
  CHECK(r.code == 2);

  // A corrupt checkpoint is a runtime failure.
  std::ofstream(dir / "bad.ckpt") << "not a checkpoint";
  r = cli("explain --checkpoint \"" + (dir / "bad.ckpt").string() + "\" --manifest \"" + data + "/manifest.tsv\" --out \"" +
              ex + "\"",
          dir / "log");
  CHECK(r.code == 1);
}
