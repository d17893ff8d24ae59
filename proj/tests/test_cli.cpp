#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::path(CECMMR_TEST_TMP_DIR) / "cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Result run(const std::string& args) {
  const fs::path out = work_dir() / "stdout.txt";
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = std::string("'") + CECMMR_CLI_PATH + "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

fs::path write_config() {
  const fs::path p = work_dir() / "toy.json";
  std::ofstream(p) << R"({
    "name": "toy",
    "dataset": {"kind": "zigzag", "n": 80, "seed": 2},
    "split": {"num_splits": 1, "num_runs": 1},
    "components": 3,
    "network": {"hidden_layers": 1, "hidden_width": 6},
    "epochs": 3,
    "batch_size": 16
  })";
  return p;
}

}  // namespace

TEST_CASE("train writes artifacts and prints the metrics") {
  const fs::path cfg = write_config();
  const fs::path root = work_dir() / "runs";
  const auto r = run("train -c '" + cfg.string() + "' --run-root '" + root.string() + "' --loss gmm --k 2");
  REQUIRE(r.code == 0);
  const json m = json::parse(r.out);
  CHECK(m["method"] == "MDN-2");
  CHECK(m["summary"]["test"]["mean_log_likelihood"]["std"] == 0.0);
  CHECK(m.contains("run_dir"));
  bool found = false;
  for (const auto& entry : fs::directory_iterator(root)) {
    found = found || fs::exists(entry.path() / "split0_run0" / "checkpoint.bin");
  }
  CHECK(found);

  const auto again = run("train -c '" + cfg.string() + "' --loss gmm --k 2 --run-root '" + root.string() + "'");
  CHECK(again.out == r.out);
}

TEST_CASE("eval, plotdata and table read the artifacts back") {
  const fs::path cfg = write_config();
  const fs::path root = work_dir() / "runs2";
  REQUIRE(run("train -c '" + cfg.string() + "' --run-root '" + root.string() + "'").code == 0);
  const fs::path dir = fs::directory_iterator(root)->path();
  const fs::path ckpt = dir / "split0_run0" / "checkpoint.bin";

  const auto ev = run("eval -c '" + cfg.string() + "' --checkpoint '" + ckpt.string() + "'");
  REQUIRE(ev.code == 0);
  const json e = json::parse(ev.out);
  CHECK(e["points"] == 16);
  const json metrics = json::parse(read_file(dir / "metrics.json"));
  CHECK(e["mean_log_likelihood"].get<double>() ==
        doctest::Approx(metrics["runs"][0]["test"]["mean_log_likelihood"].get<double>()).epsilon(1e-12));

  const auto pd = run("plotdata -c '" + cfg.string() + "' --checkpoint '" + ckpt.string() +
                      "' --x-min 0 --x-max 1 --points 11 --format json");
  REQUIRE(pd.code == 0);
  CHECK(json::parse(pd.out).size() == 11);

  const auto tb = run("table '" + dir.string() + "' --style uci");
  REQUIRE(tb.code == 0);
  CHECK(tb.out.rfind("method,zigzag\nCEC-MMR-3,", 0) == 0);
}

TEST_CASE("errors are reported as json on stderr with exit codes") {
  const auto usage = run("train");
  CHECK(usage.code == 2);
  CHECK(json::parse(usage.err)["error"] == "usage_error");

  const auto none = run("");
  CHECK(none.code == 2);

  const auto missing = run("train -c /nonexistent/config.json");
  CHECK(missing.code == 1);
  CHECK(json::parse(missing.err)["error"] == "data_error");

  const fs::path bad = work_dir() / "bad.json";
  std::ofstream(bad) << R"({"name": "bad", "components": 0})";
  const auto cfg = run("train -c '" + bad.string() + "'");
  CHECK(cfg.code == 1);
  CHECK(json::parse(cfg.err)["error"] == "config_error");

  const fs::path csv = work_dir() / "broken.csv";
  std::ofstream(csv) << "a,y\n1,2\n3,x\n";
  const fs::path csv_cfg = work_dir() / "csv.json";
  std::ofstream(csv_cfg) << R"({"name": "c", "dataset": {"kind": "csv", "path": "broken.csv", "target": "y"}})";
  const auto data = run("train -c '" + csv_cfg.string() + "'");
  CHECK(data.code == 1);
  const json err = json::parse(data.err);
  CHECK(err["error"] == "data_error");
  CHECK(err["line"] == 3);
  CHECK(err["column"] == 2);

  const auto bad_eps = run("train -c '" + write_config().string() + "' --epsilon 2");
  CHECK(bad_eps.code == 1);
}
