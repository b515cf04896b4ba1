// End-to-end tests that drive the offopt binary the way a user would.

#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(OFFOPT_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string output;
  char buf[4096];
  std::size_t got = 0;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, got);
  const int status = pclose(pipe);
  CliResult result;
  result.output = output;
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::size_t line_count(const fs::path& path) {
  const std::string text = slurp(path);
  std::size_t lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

// One workspace with a small trained model, shared across the test cases.
struct Workspace {
  fs::path dir;
  fs::path train_data;
  fs::path test_data;
  fs::path model;

  Workspace() {
    dir = fs::temp_directory_path() / "offopt_cli_tests";
    fs::remove_all(dir);
    fs::create_directories(dir);
    train_data = dir / "train.jsonl";
    test_data = dir / "test.jsonl";
    model = dir / "model.json";

    REQUIRE(run_cli("gen-train --out " + train_data.string() +
                    " --count 20 --cities 8 --seed 1")
                .code == 0);
    REQUIRE(run_cli("gen-test --out " + test_data.string() +
                    " --count 6 --min-cities 8 --max-cities 10 --seed 2")
                .code == 0);
    REQUIRE(run_cli("train --data " + train_data.string() + " --out " + model.string() +
                    " --epochs 2 --pairs-per-epoch 60 --hidden 8 --feature-dim 4 --seed 3")
                .code == 0);
  }
};

const Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("gen commands write datasets with manifests", "[cli]") {
  REQUIRE(line_count(ws().train_data) == 20);
  REQUIRE(line_count(ws().test_data) == 6);
  REQUIRE(fs::exists(ws().train_data.string() + ".manifest.json"));
  REQUIRE(fs::exists(ws().test_data.string() + ".manifest.json"));

  const std::string manifest = slurp(ws().train_data.string() + ".manifest.json");
  REQUIRE(manifest.find("\"subcommand\": \"gen-train\"") != std::string::npos);
  REQUIRE(manifest.find("\"seed\": 1") != std::string::npos);
}

TEST_CASE("gen-test with count zero writes an empty file and succeeds", "[cli]") {
  const fs::path out = ws().dir / "empty.jsonl";
  REQUIRE(run_cli("gen-test --out " + out.string() + " --count 0").code == 0);
  REQUIRE(fs::exists(out));
  REQUIRE(line_count(out) == 0);
}

TEST_CASE("missing required flags exit with code 2", "[cli]") {
  const CliResult res = run_cli("gen-train --count 5");
  REQUIRE(res.code == 2);
  REQUIRE(res.output.find("--out") != std::string::npos);
}

TEST_CASE("generation is byte-identical for a fixed seed", "[cli]") {
  const fs::path out_a = ws().dir / "repeat_a.jsonl";
  const fs::path out_b = ws().dir / "repeat_b.jsonl";
  REQUIRE(run_cli("gen-train --out " + out_a.string() + " --count 7 --cities 6 --seed 9")
              .code == 0);
  REQUIRE(run_cli("gen-train --out " + out_b.string() + " --count 7 --cities 6 --seed 9")
              .code == 0);
  REQUIRE(slurp(out_a) == slurp(out_b));
}

TEST_CASE("train writes a calibrated model and a report", "[cli]") {
  const std::string model_text = slurp(ws().model);
  REQUIRE(model_text.find("\"gaussian\"") != std::string::npos);
  REQUIRE(model_text.find("\"cost_params\"") != std::string::npos);
  REQUIRE(model_text.find("\"gaussian\": null") == std::string::npos);

  const fs::path report = ws().model.string() + ".report.csv";
  REQUIRE(fs::exists(report));
  REQUIRE(slurp(report).find("epoch,mean_loss,holdout_accuracy") == 0);
}

TEST_CASE("train rejects zero epochs with exit code 2", "[cli]") {
  const fs::path out = ws().dir / "model_bad.json";
  const CliResult res = run_cli("train --data " + ws().train_data.string() + " --out " +
                                out.string() + " --epochs 0");
  REQUIRE(res.code == 2);
}

TEST_CASE("training is reproducible byte-for-byte", "[cli]") {
  const fs::path out_a = ws().dir / "model_a.json";
  const fs::path out_b = ws().dir / "model_b.json";
  const std::string flags = " --epochs 2 --pairs-per-epoch 60 --hidden 8 --feature-dim 4 "
                            "--seed 3 --data " + ws().train_data.string();
  REQUIRE(run_cli("train --out " + out_a.string() + flags).code == 0);
  REQUIRE(run_cli("train --out " + out_b.string() + flags).code == 0);
  REQUIRE(slurp(out_a) == slurp(out_b));
}

TEST_CASE("optimize baseline equals proposed with lambda zero", "[cli]") {
  const fs::path traj_base = ws().dir / "traj_base.csv";
  const fs::path traj_l0 = ws().dir / "traj_l0.csv";
  const std::string shared = " --model " + ws().model.string() + " --data " +
                             ws().test_data.string() +
                             " --id 2 --iters 300 --t0-samples 10 --seed 4 --out ";

  const CliResult base = run_cli("optimize --mode baseline" + shared + traj_base.string());
  REQUIRE(base.code == 0);
  const CliResult l0 =
      run_cli("optimize --mode proposed --lambda 0" + shared + traj_l0.string());
  REQUIRE(l0.code == 0);

  REQUIRE(slurp(traj_base) == slurp(traj_l0));

  // printed true length matches too (strip the mode=... token difference)
  const auto tail = [](const std::string& s) {
    return s.substr(s.find("true_length="));
  };
  REQUIRE(tail(base.output) == tail(l0.output));
}

TEST_CASE("optimize writes the exact trajectory header", "[cli]") {
  const fs::path traj = ws().dir / "traj_header.csv";
  REQUIRE(run_cli("optimize --mode proposed --model " + ws().model.string() + " --data " +
                  ws().test_data.string() + " --id 0 --iters 100 --t0-samples 10 --out " +
                  traj.string())
              .code == 0);
  const std::string text = slurp(traj);
  REQUIRE(text.find("iter,temperature,cost,score,md,true_length,best_true_length\n") == 0);
}

TEST_CASE("optimize with zero iterations prints the initial route length", "[cli]") {
  const fs::path traj = ws().dir / "traj_zero.csv";
  const CliResult res = run_cli("optimize --mode baseline --model " + ws().model.string() +
                                " --data " + ws().test_data.string() +
                                " --id 1 --iters 0 --out " + traj.string());
  REQUIRE(res.code == 0);
  REQUIRE(res.output.find("true_length=") != std::string::npos);
  REQUIRE(line_count(traj) == 2);  // header + the single initial sample
}

TEST_CASE("optimize with an unknown id exits with code 4", "[cli]") {
  const fs::path traj = ws().dir / "traj_missing.csv";
  const CliResult res = run_cli("optimize --model " + ws().model.string() + " --data " +
                                ws().test_data.string() + " --id 999 --out " + traj.string());
  REQUIRE(res.code == 4);
  REQUIRE(res.output.find("999") != std::string::npos);
}

TEST_CASE("eval produces deterministic reports and summaries", "[cli]") {
  const fs::path report_a = ws().dir / "report_a.csv";
  const fs::path summary_a = ws().dir / "summary_a.csv";
  const fs::path report_b = ws().dir / "report_b.csv";
  const fs::path summary_b = ws().dir / "summary_b.csv";
  const std::string shared = " --model " + ws().model.string() + " --data " +
                             ws().test_data.string() +
                             " --iters 200 --t0-samples 10 --seed 5 --min-cities 8 "
                             "--max-cities 10 --jobs 2";

  REQUIRE(run_cli("eval --out-report " + report_a.string() + " --out-summary " +
                  summary_a.string() + shared)
              .code == 0);
  REQUIRE(run_cli("eval --out-report " + report_b.string() + " --out-summary " +
                  summary_b.string() + shared)
              .code == 0);

  REQUIRE(slurp(report_a) == slurp(report_b));
  REQUIRE(slurp(summary_a) == slurp(summary_b));

  const std::string report = slurp(report_a);
  REQUIRE(report.find("instance_id,n_cities,baseline_length,proposed_length,ratio,"
                      "baseline_rebound,proposed_rebound\n") == 0);
  REQUIRE(line_count(report_a) == 7);  // header + 6 instances

  const std::string summary = slurp(summary_a);
  REQUIRE(line_count(summary_a) == 6);  // header + 4 buckets + overall
  REQUIRE(summary.find("overall,6,") != std::string::npos);
}

TEST_CASE("eval dumps per-instance trajectories on request", "[cli]") {
  const fs::path report = ws().dir / "traj_report.csv";
  const fs::path summary = ws().dir / "traj_summary.csv";
  const fs::path traj_dir = ws().dir / "trajs";
  REQUIRE(run_cli("eval --model " + ws().model.string() + " --data " + ws().test_data.string() +
                  " --out-report " + report.string() + " --out-summary " + summary.string() +
                  " --iters 100 --t0-samples 10 --min-cities 8 --max-cities 10 "
                  "--trajectories " + traj_dir.string())
              .code == 0);
  REQUIRE(fs::exists(traj_dir / "traj_0_baseline.csv"));
  REQUIRE(fs::exists(traj_dir / "traj_0_proposed.csv"));
  REQUIRE(fs::exists(traj_dir / "traj_5_proposed.csv"));

  // a single dumped trajectory also plots on its own
  const fs::path svg = ws().dir / "single.svg";
  REQUIRE(run_cli("plot " + (traj_dir / "traj_0_proposed.csv").string() + " --out " +
                  svg.string())
              .code == 0);
  REQUIRE(slurp(svg).find("<polyline") != std::string::npos);
}

TEST_CASE("eval on an empty test set exits with code 4", "[cli]") {
  const fs::path empty = ws().dir / "empty_test.jsonl";
  std::ofstream(empty).close();
  const CliResult res =
      run_cli("eval --model " + ws().model.string() + " --data " + empty.string() +
              " --out-report /tmp/r.csv --out-summary /tmp/s.csv --iters 50");
  REQUIRE(res.code == 4);
}

TEST_CASE("plot renders one polyline per trajectory", "[cli]") {
  const fs::path traj_a = ws().dir / "plot_a.csv";
  const fs::path traj_b = ws().dir / "plot_b.csv";
  const std::string shared = " --model " + ws().model.string() + " --data " +
                             ws().test_data.string() +
                             " --id 3 --iters 200 --t0-samples 10 --out ";
  REQUIRE(run_cli("optimize --mode baseline --seed 6" + shared + traj_a.string()).code == 0);
  REQUIRE(run_cli("optimize --mode proposed --seed 6" + shared + traj_b.string()).code == 0);

  const fs::path svg = ws().dir / "plot.svg";
  REQUIRE(run_cli("plot " + traj_a.string() + " " + traj_b.string() + " --out " +
                  svg.string() + " --labels baseline proposed")
              .code == 0);
  const std::string text = slurp(svg);
  std::size_t polylines = 0, pos = 0;
  while ((pos = text.find("<polyline", pos)) != std::string::npos) {
    ++polylines;
    pos += 9;
  }
  REQUIRE(polylines == 2);
  REQUIRE(fs::exists(svg.string() + ".manifest.json"));
}

TEST_CASE("plot rejects malformed trajectories with exit code 4", "[cli]") {
  const fs::path bad = ws().dir / "bad_traj.csv";
  {
    std::ofstream out(bad);
    out << "iter,temperature,cost,score,md,true_length,best_true_length\n";
    out << "0,1.0,not_a_number,0,0,1.0,1.0\n";
  }
  const CliResult res =
      run_cli("plot " + bad.string() + " --out " + (ws().dir / "bad.svg").string());
  REQUIRE(res.code == 4);
  REQUIRE(res.output.find("row 1") != std::string::npos);
  REQUIRE(res.output.find("cost") != std::string::npos);
}

TEST_CASE("lipschitz prints a reproducible estimate", "[cli]") {
  const std::string cmd = "lipschitz --data " + ws().test_data.string() +
                          " --id 0 --samples 500 --seed 7";
  const CliResult a = run_cli(cmd);
  const CliResult b = run_cli(cmd);
  REQUIRE(a.code == 0);
  REQUIRE(a.output == b.output);
  REQUIRE(a.output.find("k_hat=") != std::string::npos);
  REQUIRE(a.output.find("pairs=") != std::string::npos);
}

TEST_CASE("lipschitz exhaustive works on a tiny instance", "[cli]") {
  const fs::path tiny = ws().dir / "tiny.jsonl";
  REQUIRE(run_cli("gen-test --out " + tiny.string() +
                  " --count 1 --min-cities 5 --max-cities 5 --seed 8")
              .code == 0);
  const CliResult res =
      run_cli("lipschitz --data " + tiny.string() + " --id 0 --exhaustive");
  REQUIRE(res.code == 0);
  REQUIRE(res.output.find("pairs=7140") != std::string::npos);  // C(120,2)
}
