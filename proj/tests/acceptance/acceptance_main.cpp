// Acceptance suite. Prints one PASS/FAIL line per criterion.
//
//   fesog_acceptance [--criterion N] [--threads N] [--data-dir DIR]
//
// Criteria 5-7 need the Filmtrust files. They are looked up through
// FESOG_FILMTRUST_MANIFEST, then <data-dir>/filmtrust/filmtrust.manifest.
// When a single data-dependent criterion is requested and the dataset is
// missing, the line reads FAIL and the exit status is 77 (ctest skip).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "fesog/experiment.hpp"
#include "fesog/federation.hpp"
#include "fesog/grad.hpp"
#include "fesog/privacy.hpp"
#include "instances.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fesog;

namespace {

constexpr int kSkip = 77;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = false;
  std::string detail;
  bool unavailable = false;
};

struct Context {
  std::size_t threads = 1;
  fs::path data_dir;
  std::optional<ExperimentConfig> tuned;  // best Filmtrust config, once selected
};

std::string fmt(double x, int precision = 6) {
  std::ostringstream o;
  o.precision(precision);
  o << x;
  return o.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Analytic gradients against central differences on random small clients.
Outcome gradient_exactness(Context&) {
  constexpr std::size_t kInstances = 60;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string where;
  for (std::size_t s = 0; s < kInstances; ++s) {
    HyperConfig cfg{.d = 8};
    cfg.share_gat_layers = s % 3 == 1;
    cfg.use_relation_vectors = s % 5 != 4;
    auto inst = testing::make_small_instance(1000 + s, cfg);
    inst.inputs.denominator = s % 2 ? LossDenominator::kUnion : LossDenominator::kReal;
    const auto oracle = finite_difference_oracle(inst.theta, inst.graph, inst.inputs, 1e-5);
    const auto cmp = testing::compare_gradients(testing::analytic_gradient(inst), oracle);
    if (cmp.max_rel > worst) {
      worst = cmp.max_rel;
      where = "instance " + std::to_string(s) + " " + cmp.worst;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          std::to_string(kInstances) + " instances, max rel err " + fmt(worst) + " (" + where +
              "), " + fmt(secs, 3) + " s"};
}

// 2. Server aggregation against a dense brute-force weighted average.
Outcome aggregation_oracle(Context&) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> n_clients(1, 10);
  double worst = 0.0;
  std::size_t sets = 0;
  for (auto mode : {AggregationMode::kInteraction, AggregationMode::kPerEntity}) {
    for (int trial = 0; trial < 500; ++trial, ++sets) {
      constexpr std::size_t d = 4, users = 12, items = 15;
      std::vector<ClientMessage> msgs;
      for (int k = n_clients(rng); k > 0; --k) msgs.push_back(testing::random_message(rng, d, users, items));
      const auto like = init_parameters(users, items, {.d = d}, 0).zeros_like();
      const auto brute = testing::brute_force_average(msgs, like, mode);
      const auto fast = testing::densify_average(aggregate(msgs, mode), like);
      worst = std::max(worst, testing::max_abs_diff(brute.grad, fast));
    }
  }
  return {worst <= 1e-12, std::to_string(sets) + " packet sets of 1-10 clients, both modes, max abs diff " + fmt(worst)};
}

// 3. One noiseless client with batch 1 follows plain gradient descent.
Outcome degenerate_federation(Context&) {
  constexpr std::size_t kRounds = 100;
  double worst = 0.0, interaction_worst = 0.0;
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    const auto inst = testing::make_instance(seed, 3, 4, 0, {.d = 8});
    const std::vector<LocalGraph> graphs = {inst.graph};
    for (auto mode : {AggregationMode::kPerEntity, AggregationMode::kInteraction}) {
      ServerConfig cfg;
      cfg.round = {.batch_size = 1, .eta = 0.05, .max_rounds = kRounds};
      cfg.client.ldp = {.delta = kInf, .lambda = 0.0};
      cfg.client.pseudo = {0, {1, 5}};
      cfg.aggregation = mode;
      cfg.seed = seed;
      auto ref = inst.theta;
      std::size_t rounds = 0;
      double dev = 0.0;
      run_server(inst.theta, graphs, {}, cfg, [&](const RoundTrace&, const ParameterSet& theta) {
        testing::dense_gd_step(ref, inst.graph, cfg.round.eta);
        dev = std::max(dev, testing::max_abs_diff(theta, ref));
        ++rounds;
      });
      if (rounds != kRounds) dev = kInf;
      double& slot = mode == AggregationMode::kPerEntity ? worst : interaction_worst;
      slot = std::max(slot, dev);
    }
  }
  return {worst < 1e-9, "3 seeds x 100 rounds, per-entity aggregation max deviation " + fmt(worst) +
                            " (interaction weighting: " + fmt(interaction_worst) + ")"};
}

// 4. Dynamic Laplace scale and the noiseless clipping identity.
Outcome ldp_statistics(Context&) {
  constexpr std::size_t d = 8, kItems = 12500;  // 1e5 item-gradient entries
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.4);
  GradientPacket packet;
  packet.model_grads = ModelWeights::zeros(d);
  for (auto tag : kAllWeightTags)
    for (double& x : packet.model_grads.tensor(tag)) x = g(rng);
  for (ItemId t = 0; t < kItems; ++t) {
    Vec v(d);
    for (double& x : v) x = g(rng);
    packet.item_grads[t] = std::move(v);
    packet.item_counts[t] = 1;
  }
  for (UserId u = 0; u < 3; ++u) {
    packet.user_grads[u] = Vec(d, 0.5 - u);
    packet.user_counts[u] = 1;
  }
  packet.interaction_count = kItems;

  const LdpConfig cfg{.delta = 0.3, .lambda = 0.1, .dynamic = true};
  Engine noise_rng(40);
  const auto noisy = protect(packet, cfg, noise_rng);
  double abs_clip = 0.0, abs_noise = 0.0;
  for (const auto& [t, v] : packet.item_grads) {
    const auto& w = noisy.item_grads.at(t);
    for (std::size_t c = 0; c < d; ++c) {
      const double clipped = std::clamp(v[c], -cfg.delta, cfg.delta);
      abs_clip += std::abs(clipped);
      abs_noise += std::abs(w[c] - clipped);
    }
  }
  const double n = static_cast<double>(kItems * d);
  const double expected = cfg.lambda * abs_clip / n;
  const double observed = abs_noise / n;  // Laplace scale MLE at known zero mean
  const double rel = std::abs(observed - expected) / expected;

  Engine clip_rng(41);
  const auto clipped = protect(packet, {.delta = 0.3, .lambda = 0.0}, clip_rng);
  bool exact = clipped.item_grads.size() == packet.item_grads.size();
  auto same = [&](std::span<const double> in, std::span<const double> out) {
    for (std::size_t i = 0; i < in.size(); ++i) exact = exact && out[i] == std::clamp(in[i], -0.3, 0.3);
  };
  for (auto tag : kAllWeightTags) same(packet.model_grads.tensor(tag), clipped.model_grads.tensor(tag));
  for (const auto& [t, v] : packet.item_grads) same(v, clipped.item_grads.at(t));
  for (const auto& [u, v] : packet.user_grads) same(v, clipped.user_grads.at(u));

  return {rel < 0.02 && exact, "scale " + fmt(observed) + " vs " + fmt(expected) + " (rel err " + fmt(rel, 3) +
                                   ") at 1e5 samples; lambda=0 clipping " + (exact ? "bit-exact" : "differs")};
}

std::optional<fs::path> filmtrust_manifest(const Context& ctx) {
  if (const char* env = std::getenv("FESOG_FILMTRUST_MANIFEST"); env && *env) {
    if (fs::exists(env)) return fs::path(env);
    return std::nullopt;
  }
  const auto p = ctx.data_dir / "filmtrust" / "filmtrust.manifest";
  if (fs::exists(p)) return p;
  return std::nullopt;
}

Outcome unavailable(const Context& ctx) {
  return {false,
          "Filmtrust not found (set FESOG_FILMTRUST_MANIFEST or place " +
              (ctx.data_dir / "filmtrust" / "filmtrust.manifest").string() + ")",
          true};
}

std::vector<ExperimentConfig> filmtrust_grid(const Context& ctx, const fs::path& manifest) {
  auto grid = ConfigGrid::load(ctx.data_dir / "configs" / "filmtrust.cfg");
  grid.override("dataset.manifest", {fs::absolute(manifest).string()});
  return grid.expand();
}

RunSummary train(const ExperimentConfig& cfg, const DatasetBundle& data, const Context& ctx) {
  return run_experiment(cfg, data, {.threads = ctx.threads, .write_outputs = false});
}

// Grid-search the Filmtrust config by validation RMSE; cached per process.
ExperimentConfig tuned_filmtrust(Context& ctx, const DatasetBundle& data, const fs::path& manifest) {
  if (ctx.tuned) return *ctx.tuned;
  const auto configs = filmtrust_grid(ctx, manifest);
  double best = kInf;
  for (const auto& cfg : configs) {
    const auto s = train(cfg, data, ctx);
    if (s.best_valid.rmse < best) {
      best = s.best_valid.rmse;
      ctx.tuned = cfg;
    }
  }
  return *ctx.tuned;
}

// 5. End-to-end Filmtrust accuracy and the global-mean baseline.
Outcome filmtrust_end_to_end(Context& ctx) {
  const auto manifest = filmtrust_manifest(ctx);
  if (!manifest) return unavailable(ctx);
  const auto data = load_dataset(DatasetManifest::load(*manifest));
  const auto cfg = tuned_filmtrust(ctx, data, *manifest);
  const auto s = train(cfg, data, ctx);

  const auto split = split_dataset(data, derive_seed(cfg.seed, Stream::kSplit));
  double mean = 0.0;
  for (const auto& r : split.train) mean += r.rating;
  mean /= static_cast<double>(split.train.size());
  Vec truth, pred;
  for (const auto& r : split.test) {
    truth.push_back(r.rating);
    pred.push_back(mean);
  }
  const auto baseline = score_predictions(truth, pred);
  const auto graphs = build_local_graphs(split);
  const auto raw = evaluate(s.best, graphs, split.test, split.scale, {.clamp = false, .threads = ctx.threads});

  const bool pass = s.test.rmse <= 2.30 && s.test.mae <= 1.75 && s.test.rmse < baseline.rmse;
  return {pass, "d=" + std::to_string(cfg.model.d) + " eta=" + fmt(cfg.round.eta) +
                    " batch=" + std::to_string(cfg.round.batch_size) + " p=" + std::to_string(cfg.pseudo_items) +
                    ": test RMSE " + fmt(s.test.rmse) + " (<= 2.30), MAE " + fmt(s.test.mae) +
                    " (<= 1.75), global mean RMSE " + fmt(baseline.rmse) + "; unclamped RMSE " +
                    fmt(raw.rmse) + " MAE " + fmt(raw.mae)};
}

// 6. Each ablation is no better than the full model in at least 2 of 3 seeds.
Outcome ablation_direction(Context& ctx) {
  const auto manifest = filmtrust_manifest(ctx);
  if (!manifest) return unavailable(ctx);
  const auto data = load_dataset(DatasetManifest::load(*manifest));
  const auto base = tuned_filmtrust(ctx, data, *manifest);
  int shared_ok = 0, norel_ok = 0;
  std::string detail;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto full = base;
    full.seed = seed;
    auto shared = full;
    shared.model.share_gat_layers = true;
    auto norel = full;
    norel.model.use_relation_vectors = false;
    const double f = train(full, data, ctx).best_valid.rmse;
    const double s = train(shared, data, ctx).best_valid.rmse;
    const double n = train(norel, data, ctx).best_valid.rmse;
    shared_ok += s >= f;
    norel_ok += n >= f;
    detail += " seed " + std::to_string(seed) + ": full " + fmt(f, 5) + " shared " + fmt(s, 5) + " no-rel " + fmt(n, 5) + ";";
  }
  return {shared_ok >= 2 && norel_ok >= 2, "shared layers worse in " + std::to_string(shared_ok) +
                                               "/3, no relation vectors worse in " + std::to_string(norel_ok) +
                                               "/3;" + detail};
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[1];
}

// 7. Median best-validation RMSE is monotone in delta and lambda.
Outcome sensitivity_monotone(Context& ctx) {
  const auto manifest = filmtrust_manifest(ctx);
  if (!manifest) return unavailable(ctx);
  const auto data = load_dataset(DatasetManifest::load(*manifest));
  const auto base = tuned_filmtrust(ctx, data, *manifest);
  auto median_rmse = [&](double delta, double lambda) {
    std::vector<double> r;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      auto cfg = base;
      cfg.seed = seed;
      cfg.ldp.delta = delta;
      cfg.ldp.lambda = lambda;
      r.push_back(train(cfg, data, ctx).best_valid.rmse);
    }
    return median3(r);
  };
  std::vector<double> by_delta, by_lambda;
  for (double delta : {0.1, 0.3, 1.0}) by_delta.push_back(median_rmse(delta, 0.1));
  for (double lambda : {0.0, 0.1, 0.5}) by_lambda.push_back(median_rmse(0.3, lambda));
  const bool delta_ok = by_delta[1] <= by_delta[0] && by_delta[2] <= by_delta[1];
  const bool lambda_ok = by_lambda[1] >= by_lambda[0] && by_lambda[2] >= by_lambda[1];
  return {delta_ok && lambda_ok, "median valid RMSE over delta {0.1,0.3,1.0}: " + fmt(by_delta[0], 5) + ", " +
                                     fmt(by_delta[1], 5) + ", " + fmt(by_delta[2], 5) + "; over lambda {0,0.1,0.5}: " +
                                     fmt(by_lambda[0], 5) + ", " + fmt(by_lambda[1], 5) + ", " + fmt(by_lambda[2], 5)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 8. Repeated runs produce byte-identical metrics files.
Outcome determinism(Context& ctx) {
  const auto work = fs::temp_directory_path() / "fesog_acceptance_determinism";
  fs::remove_all(work);
  fs::create_directories(work);
  const auto config = work / "run.cfg";
  std::ofstream(config) << "dataset.manifest = " << (ctx.data_dir / "synthetic" / "synthetic.manifest").string()
                        << "\nseed = 8\ntrain.max_rounds = 200\npseudo.p = 10\n";
  std::ostringstream log, err;
  const std::size_t threads = std::max<std::size_t>(ctx.threads, 2);
  for (const char* run : {"a", "b"})
    if (run_command(config, work / run, threads, log, err) != 0) return {false, "run failed: " + err.str()};
  const auto a = slurp(work / "a" / "metrics.csv");
  const auto b = slurp(work / "b" / "metrics.csv");
  const bool same = !a.empty() && a == b && slurp(work / "a" / "checkpoint.bin") == slurp(work / "b" / "checkpoint.bin");
  return {same, "two runs at " + std::to_string(threads) + " threads: metrics.csv " +
                    (a == b ? "identical" : "differ") + " (" + std::to_string(a.size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FeSoG acceptance suite"};
  int only = 0;
  Context ctx;
  ctx.threads = std::max(1u, std::thread::hardware_concurrency());
  std::string data_dir = FESOG_TEST_DATA_DIR;
  app.add_option("--criterion", only, "Run a single criterion (1-8)")->check(CLI::Range(1, 8));
  app.add_option("--threads", ctx.threads, "Worker threads for training runs")->check(CLI::PositiveNumber);
  app.add_option("--data-dir", data_dir, "Directory holding configs/ and datasets");
  CLI11_PARSE(app, argc, argv);
  ctx.data_dir = data_dir;

  using Check = Outcome (*)(Context&);
  const std::vector<std::pair<const char*, Check>> criteria = {
      {"gradient exactness", gradient_exactness},
      {"aggregation oracle", aggregation_oracle},
      {"degenerate federation", degenerate_federation},
      {"LDP statistics", ldp_statistics},
      {"Filmtrust end-to-end", filmtrust_end_to_end},
      {"ablation direction", ablation_direction},
      {"sensitivity monotonicity", sensitivity_monotone},
      {"determinism", determinism},
  };

  bool all = true, any_unavailable = false;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && static_cast<std::size_t>(only) != i + 1) continue;
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << " (" << criteria[i].first
              << "): " << o.detail << std::endl;
    all = all && o.pass;
    any_unavailable = any_unavailable || o.unavailable;
  }
  if (only && any_unavailable) return kSkip;
  return all ? 0 : 1;
}
