// End-to-end exercise of the command-line tool: gen -> train -> eval ->
// inspect -> gradcheck, plus error-path exit codes. Takes the binary path as
// argv[1].

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void expect(bool ok, const std::string& what) {
  if (ok) {
    std::printf("[ok] %s\n", what.c_str());
  } else {
    std::printf("[FAIL] %s\n", what.c_str());
    ++g_failures;
  }
}

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -2;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

long count_lines(const fs::path& p) {
  std::ifstream in(p);
  long n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cli_smoke <path-to-rankex>\n";
    return 2;
  }
  const std::string bin = argv[1];
  const fs::path dir = fs::temp_directory_path() / "rankex_cli_smoke";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string();
  const std::string quiet = " > " + d + "/out.txt 2>&1";

  expect(run(bin + " --help" + quiet) == 0, "--help exits zero");

  const std::string gen_flags =
      " gen --classes 4 --train-bags 60 --test-bags 40 --nr-fraction 0.5 --tie 0:1:1.0"
      " --vocab-size 40 --seed 7 --bag-max 3";
  expect(run(bin + gen_flags + " --out " + d + "/corpus" + quiet) == 0, "gen exits zero");
  expect(fs::exists(dir / "corpus/train.jsonl") && fs::exists(dir / "corpus/test.jsonl") &&
             fs::exists(dir / "corpus/truth.json"),
         "gen writes train/test/truth");

  expect(run(bin + gen_flags + " --out " + d + "/corpus2" + quiet) == 0, "gen again exits zero");
  expect(slurp(dir / "corpus/train.jsonl") == slurp(dir / "corpus2/train.jsonl"),
         "same seed gives identical corpora");

  const std::string train_dims =
      " --d1 4 --d2 2 --ds 4 --dwin 3 --clip 5 --min-count 1 --batch-size 8 --lr 0.1 --seed 3";
  expect(run(bin + " train --corpus " + d + "/corpus/train.jsonl --dev " + d +
             "/corpus/test.jsonl --out " + d + "/run --variant 3 --relieve-nr --epochs 2" +
             train_dims + " --quiet" + quiet) == 0,
         "train (variant 3, relieve) exits zero");
  expect(fs::exists(dir / "run/checkpoint/manifest.json") && fs::exists(dir / "run/metrics.csv"),
         "train writes checkpoint and metrics");
  expect(count_lines(dir / "run/metrics.csv") == 3, "metrics has header plus one row per epoch");

  expect(run(bin + " train --corpus " + d + "/corpus/train.jsonl --out " + d +
             "/run_sep --variant 1 --separated --epochs 1" + train_dims + " --quiet" + quiet) == 0,
         "train --separated exits zero");

  expect(run(bin + " train --corpus " + d + "/corpus/train.jsonl --out " + d +
             "/run_zero --epochs 0" + train_dims + " --quiet" + quiet) == 0,
         "train --epochs 0 exits zero");

  expect(run(bin + " eval --checkpoint " + d + "/run/checkpoint --corpus " + d +
             "/corpus/test.jsonl --out " + d + "/eval > " + d + "/eval_out.txt 2>&1") == 0,
         "eval exits zero");
  expect(fs::exists(dir / "eval/pr_curve.csv") && fs::exists(dir / "eval/p_at_n.csv"),
         "eval writes CSVs");
  expect(count_lines(dir / "eval/p_at_n.csv") == 7, "p_at_n.csv has 5 N rows plus mean plus header");
  expect(slurp(dir / "eval_out.txt").find("max_f=") != std::string::npos, "eval prints max_f");
  {
    // row count equals candidate pool size (3 real classes x 40 bags), below truncation
    const long rows = count_lines(dir / "eval/pr_curve.csv") - 1;
    expect(rows == 120, "pr_curve rows equal the candidate pool");
  }

  expect(run(bin + " inspect --checkpoint " + d + "/run/checkpoint --corpus " + d +
             "/corpus/test.jsonl --tuple te00000 --rescale > " + d + "/inspect.txt 2>&1") == 0,
         "inspect exits zero");
  expect(slurp(dir / "inspect.txt").find("relation,score,is_gold") != std::string::npos,
         "inspect prints the score table");

  expect(run(bin + " gradcheck --variant 1 --instances 2 --ds 4 --d1 4 --d2 2" + quiet) == 0,
         "gradcheck exits zero");

  {
    std::ofstream cfg(dir / "run.ini");
    cfg << "[train]\nepochs=1\nd1=4\nd2=2\nds=4\nclip=5\nmin-count=1\nbatch-size=8\n";
  }
  expect(run(bin + " --config " + d + "/run.ini train --corpus " + d +
             "/corpus/train.jsonl --out " + d + "/run_cfg --quiet" + quiet) == 0,
         "train with a config file exits zero");
  expect(count_lines(dir / "run_cfg/metrics.csv") == 2, "config file settings are applied");

  expect(run(bin + " eval --checkpoint " + d + "/missing --corpus " + d +
             "/corpus/test.jsonl --out " + d + "/e2" + quiet) != 0,
         "eval with a missing checkpoint exits nonzero");
  expect(run(bin + " train --corpus " + d + "/no_such_file.jsonl --out " + d + "/r2" + quiet) != 0,
         "train on a missing corpus exits nonzero");
  expect(run(bin + " --no-such-flag" + quiet) != 0, "unknown flags exit nonzero");

  if (g_failures == 0) {
    std::printf("cli_smoke: all checks passed\n");
    return 0;
  }
  std::printf("cli_smoke: %d failures\n", g_failures);
  return 1;
}
