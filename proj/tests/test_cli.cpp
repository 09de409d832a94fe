#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "fedpurin_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string cli() {
  const char* p = std::getenv("FEDPURIN_CLI");
  REQUIRE_MESSAGE(p != nullptr, "FEDPURIN_CLI is not set");
  return p;
}

// Exit status of the CLI with `args`; stdout goes to `out.txt` in scratch().
int invoke(const std::string& args) {
  const std::string cmd = "'" + cli() + "' " + args + " > '" + (scratch() / "out.txt").string() + "' 2> '" +
                          (scratch() / "err.txt").string() + "'";
  const int rc = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string write_config(const std::string& name, const std::string& body) {
  const auto p = scratch() / name;
  std::ofstream(p) << body;
  return "'" + p.string() + "'";
}

const char* kSmall =
    "num_clients = 3\nrounds = 2\nlocal_epochs = 1\nbatch_size = 5\nmodel.hidden = 6\n"
    "partition.train_per_client = 15\npartition.test_per_client = 5\n"
    "data.num_classes = 3\ndata.feature_dim = 4\ndata.samples_per_class = 40\n";

}  // namespace

TEST_CASE("run writes a run directory") {
  const auto cfg = write_config("small.cfg", kSmall);
  const auto out = scratch() / "run";
  CHECK(invoke("run --config " + cfg + " --seed 3 --out '" + out.string() + "'") == 0);
  for (const char* f : {"metrics.csv", "ledger.csv", "summary.json", "config.txt"}) {
    CHECK(fs::exists(out / "fedpurin_seed3" / f));
  }
  CHECK(invoke("run --config " + cfg + " --set method=fedavg --set tau=0.3 --seed 3 --out '" + out.string() + "'") ==
        0);
  CHECK(slurp(out / "fedavg_seed3" / "config.txt").find("score.tau = 0.3") != std::string::npos);
  CHECK(slurp(scratch() / "out.txt").find("best mean accuracy") != std::string::npos);
}

TEST_CASE("config errors exit with 1") {
  const auto cfg = write_config("small.cfg", kSmall);
  const auto out = "'" + (scratch() / "bad").string() + "'";
  CHECK(invoke("run --config " + cfg + " --set tau=1.5 --seed 1 --out " + out) == 1);
  CHECK(slurp(scratch() / "err.txt").find("tau out of (0,1]") != std::string::npos);
  CHECK(invoke("run --config " + write_config("typo.cfg", "scroe.tau = 0.1\n") + " --seed 1 --out " + out) == 1);
  CHECK(slurp(scratch() / "err.txt").find("scroe.tau") != std::string::npos);
  CHECK(invoke("run --config '" + (scratch() / "missing.cfg").string() + "' --seed 1 --out " + out) == 1);
  CHECK(invoke("run --seed 1") == 1);
  CHECK(invoke("frobnicate") == 1);
  CHECK(invoke("compare '" + (scratch() / "nothing").string() + "'") == 1);
  CHECK(slurp(scratch() / "err.txt").find("missing summary") != std::string::npos);
}

TEST_CASE("sweep and compare") {
  const auto cfg = write_config("small.cfg", kSmall);
  const auto avg = write_config("avg.cfg", std::string(kSmall) + "method = fedavg\n");
  const auto out = scratch() / "sweep";
  CHECK(invoke("sweep --config " + cfg + " --config " + avg + " --seeds 1,2 --out '" + out.string() + "'") == 0);
  CHECK(fs::exists(out / "sweep_summary.csv"));
  CHECK(fs::exists(out / "fedpurin_seed2" / "summary.json"));
  CHECK(fs::exists(out / "fedavg_seed1" / "summary.json"));
  CHECK(slurp(scratch() / "out.txt").rfind("label,runs", 0) == 0);

  const auto csv = scratch() / "cmp.csv";
  CHECK(invoke("compare '" + out.string() + "' --csv '" + csv.string() + "'") == 0);
  const auto table = slurp(csv);
  CHECK(table.find("fedpurin,2,") != std::string::npos);
  CHECK(table.find("fedavg,2,") != std::string::npos);
}

TEST_CASE("a failing sweep run exits with 2") {
  const auto bad = write_config("tiny_data.cfg", std::string(kSmall) + "data.samples_per_class = 1\n");
  const auto good = write_config("good.cfg", std::string(kSmall) + "method = separate\n");
  const auto out = scratch() / "failing";
  CHECK(invoke("sweep --config " + bad + " --config " + good + " --seeds 1 --out '" + out.string() + "'") == 2);
  CHECK(fs::exists(out / "separate_seed1" / "summary.json"));
  CHECK(fs::exists(out / "sweep_summary.csv"));
}
