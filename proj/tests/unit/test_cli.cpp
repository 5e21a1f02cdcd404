#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "clef/cli.hpp"
#include "clef/io.hpp"

namespace fs = std::filesystem;
using clef::io::Json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = clef::cli::cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

/// Fresh directory removed at scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("clef-cli-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

const std::vector<std::string> kSmallData{"--variables", "3",  "--conditions", "2",  "--trajectories",
                                          "20",          "--min-length", "6", "--max-length", "9"};
const std::vector<std::string> kSmallTrain{"--epochs", "2", "--layers", "1", "--dropout", "0", "--condition-dim", "8"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run({}).code == clef::cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == clef::cli::kExitUsage);
  CHECK(run({"train"}).code == clef::cli::kExitUsage);
  CHECK(run({"eval", "immediate", "--data", "/nonexistent", "--format", "xml"}).code == clef::cli::kExitUsage);
  const auto help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("datagen") != std::string::npos);
}

TEST_CASE("missing inputs are runtime failures") {
  const auto r = run({"eval", "immediate", "--data", "/nonexistent/clef", "--baseline", "persistence"});
  CHECK(r.code != 0);
  CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("datagen, train and eval work end to end") {
  TempDir dir("e2e");
  REQUIRE(run(cat({"datagen", "synthetic", "--out", dir / "data", "--seed", "3"}, kSmallData)).code == 0);
  for (const char* split : {"train.jsonl", "val.jsonl", "test.jsonl"}) CHECK(fs::exists(dir.path / "data" / split));

  const auto trained = run(cat({"train", "--data", dir / "data", "--out", dir / "m.ckpt"}, kSmallTrain));
  REQUIRE(trained.code == 0);
  const auto summary = Json::parse(trained.out);
  CHECK(summary.at("kind") == "clef");
  CHECK(trained.err.find("config train.epochs=2") != std::string::npos);

  const auto imm = run({"eval", "immediate", "--checkpoint", dir / "m.ckpt", "--data", dir / "data"});
  const auto del = run({"eval", "delayed", "--horizon", "1", "--checkpoint", dir / "m.ckpt", "--data", dir / "data"});
  REQUIRE(imm.code == 0);
  REQUIRE(del.code == 0);
  CHECK(imm.out == del.out);
  const auto csv = run({"eval", "immediate", "--baseline", "persistence", "--data", dir / "data", "--format", "csv"});
  CHECK(csv.out.rfind("metric,scope,horizon,value", 0) == 0);

  const auto half = run({"intervene", "--checkpoint", dir / "m.ckpt", "--data", dir / "data", "--steps", "3", "--edit",
                         "scale:x0:0.5"});
  REQUIRE(half.code == 0);
  const auto body = Json::parse(half.out);
  const auto edited = body.at("rollout").at("values");
  const auto base = body.at("baseline").at("values");
  CHECK(edited[0][0].get<double>() == doctest::Approx(0.5 * base[0][0].get<double>()).epsilon(1e-14));
  CHECK(body.at("deltas")[0][0].get<double>() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(body.at("deltas")[0][1].get<double>() == 1.0);
  CHECK(run({"intervene", "--checkpoint", dir / "m.ckpt", "--data", dir / "data", "--edit", "scale:nope:2"}).code ==
        clef::cli::kExitUsage);
}

TEST_CASE("zero-shot evaluation resolves originals from the other splits") {
  TempDir dir("zeroshot");
  REQUIRE(run(cat({"datagen", "synthetic", "--counterfactual", "--out", dir / "cf", "--trajectories", "12"},
                  {"--variables", "3", "--conditions", "2"}))
              .code == 0);
  REQUIRE(run(cat({"train", "--data", dir / "cf", "--out", dir / "m.ckpt"}, kSmallTrain)).code == 0);
  const auto ev = run({"eval", "zeroshot-cf", "--checkpoint", dir / "m.ckpt", "--data", dir / "cf"});
  INFO(ev.err);
  REQUIRE(ev.code == 0);
  CHECK(Json::parse(ev.out).size() > 3);
  // Persistence has no training ids, so the leakage check passes trivially.
  CHECK(run({"eval", "zeroshot-cf", "--baseline", "persistence", "--data", dir / "cf"}).code == 0);
}

TEST_CASE("same seed gives byte-identical artifacts and CLEF_SEED overrides --seed") {
  TempDir dir("seed");
  REQUIRE(run(cat({"datagen", "synthetic", "--out", dir / "d1", "--seed", "5"}, kSmallData)).code == 0);
  REQUIRE(run(cat({"datagen", "synthetic", "--out", dir / "d2", "--seed", "5"}, kSmallData)).code == 0);
  CHECK(slurp(dir / "d1/train.jsonl") == slurp(dir / "d2/train.jsonl"));
  REQUIRE(run(cat({"train", "--data", dir / "d1", "--out", dir / "a.ckpt", "--seed", "2"}, kSmallTrain)).code == 0);
  REQUIRE(run(cat({"train", "--data", dir / "d1", "--out", dir / "b.ckpt", "--seed", "2"}, kSmallTrain)).code == 0);
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));

  ::setenv("CLEF_SEED", "9", 1);
  const auto overridden = run(cat({"train", "--data", dir / "d1", "--out", dir / "c.ckpt", "--seed", "2"}, kSmallTrain));
  ::setenv("CLEF_SEED", "nine", 1);
  const auto bad = run(cat({"train", "--data", dir / "d1", "--out", dir / "e.ckpt"}, kSmallTrain));
  ::unsetenv("CLEF_SEED");
  REQUIRE(overridden.code == 0);
  CHECK(Json::parse(slurp(dir / "c.ckpt")).at("seed") == 9);
  CHECK(Json::parse(slurp(dir / "a.ckpt")).at("seed") == 2);
  CHECK(bad.code == clef::cli::kExitUsage);
}

TEST_CASE("tumor pipeline trains an outcome model and reports nrmse per tau") {
  TempDir dir("tumor");
  REQUIRE(run({"datagen", "tumor", "--out", dir / "t", "--gamma", "2", "--train", "12", "--val", "4", "--test", "4",
               "--max-steps", "20"})
              .code == 0);
  const auto trained = run({"train", "--data", dir / "t", "--out", dir / "o.ckpt", "--outcome-epochs", "2",
                            "--outcome-hidden", "4", "--tau", "3", "--balancing", "gr"});
  REQUIRE(trained.code == 0);
  CHECK(Json::parse(trained.out).at("model") == "clef+gr");
  const auto ev = run({"eval", "counterfactual", "--checkpoint", dir / "o.ckpt", "--data", dir / "t", "--tau-max", "3"});
  REQUIRE(ev.code == 0);
  const auto rows = Json::parse(ev.out);
  std::size_t nrmse = 0;
  for (const auto& r : rows) nrmse += r.at("metric") == "nrmse_percent";
  CHECK(nrmse == 3);
}
