#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fesog/experiment.hpp"
#include "fesog/synthetic.hpp"

namespace fesog {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fesog_experiment_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Small synthetic dataset plus a config pointing at it.
struct Workspace {
  fs::path dir;
  fs::path config;

  explicit Workspace(const std::string& name, const std::string& extra = "") {
    dir = scratch_dir(name);
    SyntheticSpec spec;
    spec.n_users = 60;
    spec.n_items = 80;
    spec.ratings_per_user = 12;
    write_dataset(synthetic_dataset(spec, 11), dir / "ratings.txt", dir / "trust.txt");
    std::ofstream(dir / "toy.manifest") << "name = toy\nratings = ratings.txt\ntrust = trust.txt\n"
                                           "rating_min = 1\nrating_max = 5\n";
    config = dir / "run.cfg";
    std::ofstream(config) << "dataset.manifest = toy.manifest\nseed = 5\nmodel.d = 4\n"
                             "train.batch_size = 16\ntrain.eta = 0.05\ntrain.max_rounds = 30\n"
                             "train.eval_every = 10\npseudo.p = 3\n"
                          << extra;
  }
};

int run(const fs::path& config, const fs::path& out, std::size_t threads = 1) {
  std::ostringstream log, err;
  const int code = run_command(config, out, threads, log, err);
  EXPECT_EQ(code, 0) << err.str();
  return code;
}

TEST(ExperimentConfig, ParsesEveryKey) {
  std::istringstream in(
      "dataset.manifest = d/x.manifest\nseed = 9\nmodel.d = 16\nmodel.share_gat_layers = true\n"
      "model.use_relation_vectors = false\ntrain.batch_size = 32\ntrain.eta = 0.01\n"
      "train.max_rounds = 7\ntrain.patience = 3\ntrain.eval_every = 2\nldp.delta = inf\n"
      "ldp.lambda = 0\nldp.dynamic = false\npseudo.p = 4\nloss.denominator = union\n"
      "aggregation.mode = per-entity\neval.clamp = false\noutput.dir = results\n");
  const auto cfgs = ConfigGrid::parse(in, "/base").expand();
  ASSERT_EQ(cfgs.size(), 1u);
  const auto& c = cfgs[0];
  EXPECT_EQ(c.manifest, fs::path("/base/d/x.manifest"));
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.model, (HyperConfig{.d = 16, .share_gat_layers = true, .use_relation_vectors = false}));
  EXPECT_EQ(c.round.batch_size, 32u);
  EXPECT_EQ(c.round.eta, 0.01);
  EXPECT_EQ(c.round.max_rounds, 7u);
  EXPECT_EQ(c.round.patience, 3u);
  EXPECT_EQ(c.round.eval_every, 2u);
  EXPECT_TRUE(std::isinf(c.ldp.delta));
  EXPECT_EQ(c.ldp.lambda, 0.0);
  EXPECT_FALSE(c.ldp.dynamic);
  EXPECT_EQ(c.pseudo_items, 4u);
  EXPECT_EQ(c.denominator, LossDenominator::kUnion);
  EXPECT_EQ(c.aggregation, AggregationMode::kPerEntity);
  EXPECT_FALSE(c.clamp_eval);
  EXPECT_EQ(c.out_dir, fs::path("/base/results"));
}

TEST(ExperimentConfig, CanonicalTextRoundTrips) {
  std::istringstream in("dataset.manifest = m\nldp.delta = 0.1\ntrain.eta = 0.3\nldp.dynamic = false\n");
  const auto a = ConfigGrid::parse(in, "/b").expand().front();
  std::istringstream text(a.to_text());
  const auto b = ConfigGrid::parse(text, "/elsewhere").expand().front();
  EXPECT_EQ(a.to_text(), b.to_text());
  EXPECT_EQ(b.round.eta, 0.3);
}

TEST(ExperimentConfig, ErrorsNameTheField) {
  auto field_of = [](const std::string& text) -> std::string {
    std::istringstream in(text);
    try {
      ConfigGrid::parse(in, "/b").expand();
    } catch (const ConfigError& e) {
      return e.field();
    }
    return "<none>";
  };
  EXPECT_EQ(field_of("dataset.manifest = m\nmodel.colour = red\n"), "model.colour");
  EXPECT_EQ(field_of("dataset.manifest = m\nmodel.d = 0\n"), "model.d");
  EXPECT_EQ(field_of("dataset.manifest = m\nmodel.d = -3\n"), "model.d");
  EXPECT_EQ(field_of("dataset.manifest = m\ntrain.eta = fast\n"), "train.eta");
  EXPECT_EQ(field_of("dataset.manifest = m\nldp.delta = 0\n"), "ldp.delta");
  EXPECT_EQ(field_of("dataset.manifest = m\nldp.lambda = -1\n"), "ldp.lambda");
  EXPECT_EQ(field_of("dataset.manifest = m\nmodel.share_gat_layers = maybe\n"), "model.share_gat_layers");
  EXPECT_EQ(field_of("dataset.manifest = m\naggregation.mode = mean\n"), "aggregation.mode");
  EXPECT_EQ(field_of("dataset.manifest = m\nloss.denominator = all\n"), "loss.denominator");
  EXPECT_EQ(field_of("seed = 1\n"), "dataset.manifest");
}

TEST(ConfigGrid, ListValuesExpandLastKeyFastest) {
  std::istringstream in("dataset.manifest = m\nmodel.d = 4, 8\nseed = 1\nldp.lambda = 0,0.1,0.5\n");
  const auto grid = ConfigGrid::parse(in, "/b");
  EXPECT_EQ(grid.grid_keys(), (std::vector<std::string>{"model.d", "ldp.lambda"}));
  const auto cfgs = grid.expand();
  ASSERT_EQ(cfgs.size(), 6u);
  EXPECT_EQ(cfgs[0].model.d, 4u);
  EXPECT_EQ(cfgs[0].ldp.lambda, 0.0);
  EXPECT_EQ(cfgs[1].ldp.lambda, 0.1);
  EXPECT_EQ(cfgs[3].model.d, 8u);
  EXPECT_EQ(cfgs[5].ldp.lambda, 0.5);
  for (const auto& c : cfgs) EXPECT_EQ(c.seed, 1u);
}

TEST(ConfigGrid, OverrideReplacesValues) {
  std::istringstream in("dataset.manifest = m\nmodel.d = 4, 8\n");
  auto grid = ConfigGrid::parse(in, "/b");
  grid.override("model.d", {"12"});
  EXPECT_TRUE(grid.grid_keys().empty());
  EXPECT_EQ(grid.expand().front().model.d, 12u);
}

TEST(AxisKey, KnownAxes) {
  EXPECT_EQ(axis_key("batch_size"), "train.batch_size");
  EXPECT_EQ(axis_key("p"), "pseudo.p");
  EXPECT_EQ(axis_key("d"), "model.d");
  EXPECT_EQ(axis_key("eta"), "train.eta");
  EXPECT_EQ(axis_key("delta"), "ldp.delta");
  EXPECT_EQ(axis_key("lambda"), "ldp.lambda");
  EXPECT_EQ(axis_key("colour"), std::nullopt);
}

TEST(GitBlobHash, MatchesGitObjectIds) {
  const auto dir = scratch_dir("hash");
  std::ofstream(dir / "empty");
  std::ofstream(dir / "hello") << "hello\n";
  EXPECT_EQ(git_blob_hash(dir / "empty"), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_hash(dir / "hello"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_THROW(git_blob_hash(dir / "absent"), std::runtime_error);
}

TEST(RunCommand, ZeroRoundsWritesHeaderOnlyMetrics) {
  Workspace ws("zero_rounds", "train.max_rounds = 0\n");
  const auto out = ws.dir / "out";
  ASSERT_EQ(run(ws.config, out), 0);
  EXPECT_EQ(slurp(out / "metrics.csv"), "round,split,rmse,mae,n\n");
  EXPECT_TRUE(fs::exists(out / "checkpoint.bin"));
  EXPECT_TRUE(fs::exists(out / "run_manifest.txt"));
  EXPECT_TRUE(fs::exists(out / "rounds.log"));
}

TEST(RunCommand, WritesAllOutputs) {
  Workspace ws("outputs");
  const auto out = ws.dir / "out";
  ASSERT_EQ(run(ws.config, out), 0);
  const auto metrics = slurp(out / "metrics.csv");
  EXPECT_EQ(metrics.rfind("round,split,rmse,mae,n\n", 0), 0u);
  EXPECT_NE(metrics.find(",valid,"), std::string::npos);
  EXPECT_NE(metrics.find(",test,"), std::string::npos);
  const auto manifest = slurp(out / "run_manifest.txt");
  EXPECT_NE(manifest.find("seed = 5"), std::string::npos);
  EXPECT_NE(manifest.find(git_blob_hash(ws.dir / "ratings.txt")), std::string::npos);
  EXPECT_FALSE(slurp(out / "rounds.log").empty());
}

TEST(RunCommand, SameSeedGivesIdenticalMetrics) {
  Workspace ws("determinism");
  ASSERT_EQ(run(ws.config, ws.dir / "a"), 0);
  ASSERT_EQ(run(ws.config, ws.dir / "b"), 0);
  ASSERT_EQ(run(ws.config, ws.dir / "c", 4), 0);
  const auto a = slurp(ws.dir / "a" / "metrics.csv");
  EXPECT_EQ(a, slurp(ws.dir / "b" / "metrics.csv"));
  EXPECT_EQ(a, slurp(ws.dir / "c" / "metrics.csv"));
  EXPECT_EQ(slurp(ws.dir / "a" / "checkpoint.bin"), slurp(ws.dir / "c" / "checkpoint.bin"));
}

TEST(RunCommand, RunManifestReproducesTheRun) {
  Workspace ws("replay");
  ASSERT_EQ(run(ws.config, ws.dir / "first"), 0);
  ASSERT_EQ(run(ws.dir / "first" / "run_manifest.txt", ws.dir / "replay"), 0);
  EXPECT_EQ(slurp(ws.dir / "first" / "metrics.csv"), slurp(ws.dir / "replay" / "metrics.csv"));
}

TEST(RunCommand, GridWritesOneDirectoryPerCombination) {
  Workspace ws("grid", "model.d = 2,4\n");
  ASSERT_EQ(run(ws.config, ws.dir / "out"), 0);
  EXPECT_TRUE(fs::exists(ws.dir / "out" / "0_model.d=2" / "metrics.csv"));
  EXPECT_TRUE(fs::exists(ws.dir / "out" / "1_model.d=4" / "metrics.csv"));
  std::istringstream summary(slurp(ws.dir / "out" / "grid.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(summary, line)) ++rows;
  EXPECT_EQ(rows, 3u);
}

TEST(RunCommand, FailuresExitNonZero) {
  Workspace ws("failures");
  std::ostringstream log, err;
  std::ofstream(ws.dir / "bad.cfg") << "dataset.manifest = toy.manifest\ntrain.eta = -1\n";
  EXPECT_EQ(run_command(ws.dir / "bad.cfg", std::nullopt, 1, log, err), 2);
  EXPECT_NE(err.str().find("train.eta"), std::string::npos);

  std::ofstream(ws.dir / "nodata.cfg") << "dataset.manifest = missing.manifest\n";
  EXPECT_NE(run_command(ws.dir / "nodata.cfg", std::nullopt, 1, log, err), 0);
  EXPECT_NE(run_command(ws.dir / "absent.cfg", std::nullopt, 1, log, err), 0);
}

TEST(SweepCommand, UnknownAxisExitsTwo) {
  Workspace ws("sweep_axis");
  std::ostringstream log, err;
  EXPECT_EQ(sweep_command(ws.config, "colour", {"1"}, ws.dir / "out", 1, log, err), 2);
  EXPECT_NE(err.str().find("colour"), std::string::npos);
}

TEST(SweepCommand, SingleValueMatchesPlainRun) {
  Workspace ws("sweep_single", "ldp.lambda = 0.2\n");
  ASSERT_EQ(run(ws.config, ws.dir / "run"), 0);
  std::ostringstream log, err;
  ASSERT_EQ(sweep_command(ws.config, "lambda", {"0.2"}, ws.dir / "sweep", 1, log, err), 0) << err.str();
  EXPECT_EQ(slurp(ws.dir / "run" / "metrics.csv"), slurp(ws.dir / "sweep" / "lambda_0.2" / "metrics.csv"));
  const auto summary = slurp(ws.dir / "sweep" / "sweep_lambda.csv");
  EXPECT_EQ(summary.rfind("lambda,best_round,best_valid_rmse,best_valid_mae,test_rmse,test_mae\n0.2,", 0), 0u);
}

TEST(SweepCommand, OneRunPerValue) {
  Workspace ws("sweep_values");
  std::ostringstream log, err;
  ASSERT_EQ(sweep_command(ws.config, "d", {"2", "4", "6"}, ws.dir / "out", 2, log, err), 0) << err.str();
  for (const char* v : {"d_2", "d_4", "d_6"}) EXPECT_TRUE(fs::exists(ws.dir / "out" / v / "metrics.csv"));
  EXPECT_TRUE(fs::exists(ws.dir / "out" / "sweep_d.csv"));
}

}  // namespace
}  // namespace fesog
