#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "llvd/data.hpp"
#include "llvd/flops.hpp"
#include "test_support.hpp"

// End-to-end checks of the command-line tool. The test runner exports
// LLVD_CLI with the path to the built binary.

using namespace llvd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::string& cli_path() {
  static const std::string path = [] {
    const char* p = std::getenv("LLVD_CLI");
    REQUIRE_MESSAGE(p != nullptr, "LLVD_CLI must point at the built binary");
    return std::string(p);
  }();
  return path;
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path();
  const fs::path outp = dir / ("llvd_cli_out_" + std::to_string(++counter));
  const fs::path errp = dir / ("llvd_cli_err_" + std::to_string(counter));
  const std::string cmd =
      "\"" + cli_path() + "\" " + args + " > " + outp.string() + " 2> " + errp.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(outp);
  r.err = slurp(errp);
  fs::remove(outp);
  fs::remove(errp);
  return r;
}

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("llvd_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_tiny_model_config(const fs::path& p, int64_t train_steps) {
  std::ofstream out(p);
  out << "model.stage_widths = 4,6,8\n"
         "model.lstm_hidden = 8\n"
         "model.lstm_layers = 2\n"
         "model.kernel = 3\n"
         "model.in_channels = 3\n"
         "model.shuffle = 2\n"
         "model.conv_per_stage = 2\n"
         "train.steps = " << train_steps << "\n"
         "train.batch = 1\n"
         "train.crop = 0\n"
         "train.frames = 2\n"
         "train.sigmas = 25\n"
         "train.log_every = 1\n"
         "train.seed = 5\n";
}

// A smooth two-frame 16x16 clip the tiny architecture accepts.
void write_clip(const fs::path& dir, int frames) {
  fs::create_directories(dir);
  for (int t = 0; t < frames; ++t) {
    Tensor img = Tensor::zeros({3, 16, 16});
    float* p = img.data();
    for (int64_t c = 0; c < 3; ++c) {
      for (int64_t y = 0; y < 16; ++y) {
        for (int64_t x = 0; x < 16; ++x) {
          p[(c * 16 + y) * 16 + x] =
              0.2f + 0.04f * float(c) + 0.02f * float(y) + 0.01f * float(t);
        }
      }
    }
    char name[16];
    std::snprintf(name, sizeof(name), "f%02d.ppm", t);
    save_image((dir / name).string(), img);
  }
}

}  // namespace

TEST_CASE("argument errors exit with code 2") {
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("flops --no-such-flag").exit_code == 2);
  CHECK(run_cli("no-such-command").exit_code == 2);
  CHECK(run_cli("flops").exit_code == 2);  // missing required --config
}

TEST_CASE("help exits cleanly and names the subcommands") {
  RunResult r = run_cli("--help");
  CHECK(r.exit_code == 0);
  for (const char* sub : {"noise", "train", "denoise", "eval", "flops", "selfcheck"}) {
    CHECK(r.out.find(sub) != std::string::npos);
  }
}

TEST_CASE("selfcheck passes on a healthy build") {
  RunResult r = run_cli("selfcheck");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("[ok]") != std::string::npos);
  CHECK(r.out.find("[fail]") == std::string::npos);
}

TEST_CASE("runtime failures exit 1 with a one-line cause") {
  RunResult r = run_cli("noise --input /nonexistent/frames --output /tmp/x.ppm");
  CHECK(r.exit_code == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);
  CHECK(r.err.find('\n') == r.err.size() - 1);  // exactly one line
}

TEST_CASE("flops reports machine-readable numbers that match the library") {
  fs::path dir = fresh_dir("flops");
  write_tiny_model_config(dir / "m.cfg", 0);

  RunResult r = run_cli("flops --config " + (dir / "m.cfg").string() +
                        " --width 64 --height 48 --json --probe");
  CHECK(r.exit_code == 0);
  const json j = json::parse(r.out);
  const CostReport rep = count_flops(test::tiny_config(), 48, 64);
  CHECK(double(j["macs"]) == rep.macs);
  CHECK(double(j["flops"]) == rep.flops());
  CHECK(uint64_t(j["probed_macs"]) == uint64_t(rep.macs));

  // A malformed config is a runtime failure, not a crash.
  std::ofstream(dir / "bad.cfg") << "model.kernel = 4\n";
  RunResult bad = run_cli("flops --config " + (dir / "bad.cfg").string());
  CHECK(bad.exit_code == 1);
  CHECK(bad.err.rfind("error: ", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("noise synthesis is reproducible and respects the stream id") {
  fs::path dir = fresh_dir("noise");
  write_clip(dir / "clean", 1);
  const std::string input = (dir / "clean" / "f00.ppm").string();

  const std::string base = "noise --input " + input + " --sigma 25 --seed 9 ";
  CHECK(run_cli(base + "--output " + (dir / "a.ppm").string()).exit_code == 0);
  CHECK(run_cli(base + "--output " + (dir / "b.ppm").string()).exit_code == 0);
  CHECK(run_cli(base + "--sequence 1 --output " + (dir / "c.ppm").string()).exit_code == 0);

  const std::string a = slurp(dir / "a.ppm");
  CHECK(a == slurp(dir / "b.ppm"));
  CHECK(a != slurp(dir / "c.ppm"));
  CHECK(!a.empty());
  fs::remove_all(dir);
}

TEST_CASE("train, denoise, and eval cooperate end to end") {
  fs::path dir = fresh_dir("e2e");
  write_tiny_model_config(dir / "m.cfg", 2);
  write_clip(dir / "data" / "clip0", 2);

  // Two quick optimizer steps produce a loadable checkpoint.
  RunResult tr = run_cli("train --config " + (dir / "m.cfg").string() + " --data " +
                         (dir / "data").string() + " --output " + (dir / "model.llvc").string());
  CHECK(tr.exit_code == 0);
  CHECK(tr.out.find("step 0 loss") != std::string::npos);
  CHECK(tr.out.find("done: 2 steps") != std::string::npos);
  REQUIRE(fs::exists(dir / "model.llvc"));

  // Noise a three-frame clip, then denoise it in one pass.
  write_clip(dir / "clean", 3);
  CHECK(run_cli("noise --input " + (dir / "clean").string() + " --output " +
                (dir / "noisy").string() + " --sigma 25 --seed 3")
            .exit_code == 0);
  CHECK(run_cli("denoise --checkpoint " + (dir / "model.llvc").string() + " --input " +
                (dir / "noisy").string() + " --output " + (dir / "out_whole").string())
            .exit_code == 0);

  // Same clip split across two invocations with a state file between them.
  fs::create_directories(dir / "noisy_head");
  fs::copy(dir / "noisy" / "f00.ppm", dir / "noisy_head" / "f00.ppm");
  fs::copy(dir / "noisy" / "f01.ppm", dir / "noisy_head" / "f01.ppm");
  CHECK(run_cli("denoise --checkpoint " + (dir / "model.llvc").string() + " --input " +
                (dir / "noisy_head").string() + " --output " + (dir / "out_split").string() +
                " --state-out " + (dir / "s.llvs").string())
            .exit_code == 0);
  CHECK(run_cli("denoise --checkpoint " + (dir / "model.llvc").string() + " --input " +
                (dir / "noisy" / "f02.ppm").string() + " --output " +
                (dir / "out_split" / "f02.ppm").string() + " --state-in " +
                (dir / "s.llvs").string())
            .exit_code == 0);

  for (const char* f : {"f00.ppm", "f01.ppm", "f02.ppm"}) {
    CHECK(slurp(dir / "out_whole" / f) == slurp(dir / "out_split" / f));
  }

  // Quality report: restored frames against the clean reference.
  RunResult ev = run_cli("eval --noisy " + (dir / "out_whole").string() + " --clean " +
                         (dir / "clean").string() + " --json");
  CHECK(ev.exit_code == 0);
  const json j = json::parse(ev.out);
  CHECK(j["frames"].size() == 3);
  CHECK(j["psnr"].is_number());
  CHECK(j.contains("ssim"));

  // Identical inputs report infinite PSNR as the string "inf".
  RunResult inf = run_cli("eval --noisy " + (dir / "clean").string() + " --clean " +
                          (dir / "clean").string() + " --json");
  CHECK(inf.exit_code == 0);
  CHECK(json::parse(inf.out)["psnr"] == "inf");
  fs::remove_all(dir);
}
