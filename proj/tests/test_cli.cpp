#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = TEST_WORK_DIR;

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + CONAD_BIN + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

fs::path fresh(const std::string& name) {
  const fs::path p = kWork / name;
  fs::remove_all(p);
  return p;
}

std::string path(const fs::path& p) { return p.string(); }

const std::string kSmallModes = "--set data.generator=imbalanced_modes --set data.n=200 --set data.seed=3";
const std::string kShortTrain = "--set train.epochs_max=4 --set train.patience=4 --set model.hypotheses=2";

// A small 2-D dataset shared by several cases.
fs::path modes_data() {
  static const fs::path dir = [] {
    const fs::path d = fresh("modes_data");
    REQUIRE(run("gen " + kSmallModes + " --out " + path(d)) == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("gen is byte-identical for a fixed seed and echoes the config") {
  const fs::path a = fresh("gen_a"), b = fresh("gen_b");
  REQUIRE(run("gen " + kSmallModes + " --out " + path(a)) == 0);
  REQUIRE(run("gen " + kSmallModes + " --out " + path(b)) == 0);
  for (const char* f : {"dataset.txt", "train.csv", "valid.csv", "test_normal.csv", "test_anomaly.csv", "config.txt"}) {
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(slurp(a / "config.txt").find("data.n = 200") != std::string::npos);
}

TEST_CASE("gen texture file sizes follow the header arithmetic") {
  const fs::path d = fresh("gen_texture");
  REQUIRE(run("gen --set data.generator=texture --set data.n=100 --set data.side=16 --out " + path(d)) == 0);
  const auto expect = [](std::uintmax_t count) { return 5 + 8 + 8 + count * 256 * 8; };
  CHECK(fs::file_size(d / "train.cdat") == expect(80));
  CHECK(fs::file_size(d / "valid.cdat") == expect(10));
  CHECK(fs::file_size(d / "test_normal.cdat") == expect(10));
  CHECK(fs::file_size(d / "test_anomaly.cdat") == expect(10));
}

TEST_CASE("configuration errors exit with code 2") {
  const fs::path out = fresh("bad_config");
  CHECK(run("gen --set data.generator=spiral --out " + path(out)) == 2);
  CHECK(run("gen --set data.bogus=1 --out " + path(out)) == 2);
  CHECK(run("gen --set data.n --out " + path(out)) == 2);
  CHECK(run("gen --config /nonexistent.conf --out " + path(out)) == 2);
  CHECK(run("frobnicate --out " + path(out)) == 2);

  const std::string msg_file = path(kWork / "spiral_msg.txt");
  const int status = std::system((std::string(CONAD_BIN) + " gen --set data.generator=spiral --out " + path(out) + " 2> " + msg_file).c_str());
  CHECK(status != 0);
  CHECK(slurp(msg_file).find("half_moon") != std::string::npos);
}

TEST_CASE("missing data exits with code 3") {
  CHECK(run("train --data " + path(kWork / "does_not_exist") + " --out " + path(fresh("missing"))) == 3);
}

TEST_CASE("train writes a bounded report and vae equals wta with one head") {
  const fs::path a = fresh("train_vae"), b = fresh("train_wta");
  const std::string common = "--data " + path(modes_data()) + " --set model.hypotheses=1 --set train.epochs_max=6 "
                             "--set train.patience=6 --set train.seed=2";
  REQUIRE(run("train " + common + " --set loss.kind=vae --out " + path(a)) == 0);
  REQUIRE(run("train " + common + " --set loss.kind=wta --out " + path(b)) == 0);
  const std::string csv = slurp(a / "train_report.csv");
  CHECK(csv == slurp(b / "train_report.csv"));
  CHECK(slurp(a / "model.ckpt") == slurp(b / "model.ckpt"));
  const auto rows = std::count(csv.begin(), csv.end(), '\n') - 1;
  CHECK(rows >= 1);
  CHECK(rows <= 6);
  CHECK(csv.rfind("epoch,train_loss,val_loss,seconds\n", 0) == 0);
  CHECK(fs::exists(a / "config.txt"));
}

TEST_CASE("training is reproducible and CONAD_SEED overrides train.seed") {
  const fs::path a = fresh("seed_a"), b = fresh("seed_b"), c = fresh("seed_env"), d = fresh("seed_other");
  const std::string common = "--data " + path(modes_data()) + " --set loss.kind=conad " + kShortTrain;
  REQUIRE(run("train " + common + " --set train.seed=5 --out " + path(a)) == 0);
  REQUIRE(run("train " + common + " --set train.seed=5 --out " + path(b)) == 0);
  REQUIRE(run("train " + common + " --set train.seed=0 --out " + path(c), "CONAD_SEED=5") == 0);
  REQUIRE(run("train " + common + " --set train.seed=6 --out " + path(d)) == 0);
  CHECK(slurp(a / "train_report.csv") == slurp(b / "train_report.csv"));
  CHECK(slurp(a / "model.ckpt") == slurp(b / "model.ckpt"));
  CHECK(slurp(a / "train_report.csv") == slurp(c / "train_report.csv"));
  CHECK(slurp(a / "train_report.csv") != slurp(d / "train_report.csv"));
  CHECK(slurp(c / "config.txt").find("train.seed = 5") != std::string::npos);
}

TEST_CASE("a NaN in the training data exits with code 4") {
  const fs::path poisoned = fresh("poisoned");
  fs::copy(modes_data(), poisoned);
  std::string csv = slurp(poisoned / "train.csv");
  const auto second_line = csv.find('\n') + 1;
  csv.replace(second_line, csv.find('\n', second_line) - second_line, "nan,0.5");
  std::ofstream(poisoned / "train.csv", std::ios::trunc) << csv;
  CHECK(run("train --data " + path(poisoned) + " " + kShortTrain + " --out " + path(fresh("poisoned_out"))) == 4);
}

TEST_CASE("eval on point data") {
  const fs::path model = fresh("eval_model");
  REQUIRE(run("train --data " + path(modes_data()) + " " + kShortTrain + " --out " + path(model)) == 0);
  const std::string args = "eval --data " + path(modes_data()) + " " + kShortTrain + " --checkpoint " +
                           path(model / "model.ckpt");
  const fs::path a = fresh("eval_a"), b = fresh("eval_b");
  REQUIRE(run(args + " --out " + path(a)) == 0);
  REQUIRE(run(args + " --out " + path(b)) == 0);
  for (const char* f : {"scores.csv", "roc.csv", "eval_summary.txt"}) CHECK(slurp(a / f) == slurp(b / f));
  const std::string scores = slurp(a / "scores.csv");
  CHECK(scores.rfind("sample_id,label,aggregate,normalized\n", 0) == 0);
  CHECK(scores.find("\nauroc,,") != std::string::npos);
  CHECK(fs::exists(a / "scatter.svg"));
  bool heatmap = false;
  for (const auto& e : fs::directory_iterator(a)) heatmap |= e.path().filename().string().rfind("heatmap", 0) == 0;
  CHECK_FALSE(heatmap);

  CHECK(run(args + " --split train --out " + path(fresh("eval_train"))) == 2);
  CHECK(run("eval --data " + path(modes_data()) + " --set model.hypotheses=3 --checkpoint " +
            path(model / "model.ckpt") + " --out " + path(fresh("eval_mismatch"))) == 2);
}

TEST_CASE("eval on image data writes heatmaps") {
  const fs::path data = fresh("img_data"), model = fresh("img_model"), out = fresh("img_eval");
  REQUIRE(run("gen --set data.generator=texture --set data.n=60 --set data.side=8 --out " + path(data)) == 0);
  const std::string cfg = " --set train.epochs_max=2 --set train.patience=2 --set score.heatmaps=2";
  REQUIRE(run("train --data " + path(data) + cfg + " --out " + path(model)) == 0);
  REQUIRE(run("eval --data " + path(data) + cfg + " --checkpoint " + path(model / "model.ckpt") + " --out " +
              path(out)) == 0);
  std::size_t heatmaps = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("heatmap_", 0) == 0 && e.path().extension() == ".svg") ++heatmaps;
  }
  CHECK(heatmaps == 4);
  CHECK_FALSE(fs::exists(out / "scatter.svg"));
}

TEST_CASE("lemma demos pass") {
  const fs::path l41 = fresh("demo41"), l42 = fresh("demo42");
  CHECK(run("demo lemma41 --set data.n=300 --set train.epochs_max=20 --set train.patience=20 --out " + path(l41)) == 0);
  const std::string report = slurp(l41 / "report.txt");
  CHECK(report.find("delta_sample 0\n") != std::string::npos);
  CHECK(report.find("delta_pixel 0\n") != std::string::npos);
  CHECK(run("demo lemma42 --set model.hypotheses=4 --out " + path(l42)) == 0);
  CHECK(fs::exists(l42 / "epsilon_sweep.svg"));
  CHECK(run("demo nonsense --out " + path(fresh("demo_bad"))) == 2);
}

TEST_CASE("halfmoon figure draws data and model samples in distinct colors") {
  const fs::path out = fresh("demo_halfmoon");
  const int code = run("demo halfmoon_figure --set data.n=300 --set train.epochs_max=3 --set train.patience=3 "
                       "--set model.hypotheses=2 --out " + path(out));
  CHECK((code == 0 || code == 1));
  for (const char* f : {"halfmoon_wta.svg", "halfmoon_conad.svg"}) {
    const std::string svg = slurp(out / f);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("#1f77b4") != std::string::npos);
    CHECK(svg.find("#d62728") != std::string::npos);
  }
}
