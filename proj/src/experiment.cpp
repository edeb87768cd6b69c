#include "fesog/experiment.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "fesog/checkpoint.hpp"
#include "fesog/kv.hpp"
#include "fesog/rng.hpp"

namespace fesog {

namespace {

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::string real_text(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream ss;
  ss << std::setprecision(17) << x;
  return ss.str();
}

const char* bool_text(bool b) { return b ? "true" : "false"; }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v) {
  std::filesystem::path p(v);
  if (p.is_relative()) p = base / p;
  return std::filesystem::absolute(p).lexically_normal();
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value,
                           const std::filesystem::path& base) {
  if (key == "dataset.manifest") {
    manifest = resolve(base, value);
  } else if (key == "seed") {
    seed = parse_uint(key, value);
  } else if (key == "model.d") {
    model.d = parse_uint(key, value);
  } else if (key == "model.share_gat_layers") {
    model.share_gat_layers = parse_bool(key, value);
  } else if (key == "model.use_relation_vectors") {
    model.use_relation_vectors = parse_bool(key, value);
  } else if (key == "train.batch_size") {
    round.batch_size = parse_uint(key, value);
  } else if (key == "train.eta") {
    round.eta = parse_real(key, value);
  } else if (key == "train.max_rounds") {
    round.max_rounds = parse_uint(key, value);
  } else if (key == "train.patience") {
    round.patience = parse_uint(key, value);
  } else if (key == "train.eval_every") {
    round.eval_every = parse_uint(key, value);
  } else if (key == "ldp.delta") {
    ldp.delta = parse_real(key, value);
  } else if (key == "ldp.lambda") {
    ldp.lambda = parse_real(key, value);
  } else if (key == "ldp.dynamic") {
    ldp.dynamic = parse_bool(key, value);
  } else if (key == "pseudo.p") {
    pseudo_items = parse_uint(key, value);
  } else if (key == "loss.denominator") {
    if (value == "real") {
      denominator = LossDenominator::kReal;
    } else if (value == "union") {
      denominator = LossDenominator::kUnion;
    } else {
      throw ConfigError(key, "expected real or union, got '" + value + "'");
    }
  } else if (key == "aggregation.mode") {
    if (value == "interaction") {
      aggregation = AggregationMode::kInteraction;
    } else if (value == "per-entity") {
      aggregation = AggregationMode::kPerEntity;
    } else {
      throw ConfigError(key, "expected interaction or per-entity, got '" + value + "'");
    }
  } else if (key == "eval.clamp") {
    clamp_eval = parse_bool(key, value);
  } else if (key == "output.dir") {
    out_dir = resolve(base, value);
  } else {
    throw ConfigError(key, "unknown key");
  }
}

void ExperimentConfig::validate() const {
  if (manifest.empty()) throw ConfigError("dataset.manifest", "required");
  if (model.d == 0) throw ConfigError("model.d", "must be > 0");
  if (round.batch_size == 0) throw ConfigError("train.batch_size", "must be >= 1");
  if (!(round.eta > 0.0)) throw ConfigError("train.eta", "must be > 0");
  if (round.patience == 0) throw ConfigError("train.patience", "must be >= 1");
  if (round.eval_every == 0) throw ConfigError("train.eval_every", "must be >= 1");
  if (!(ldp.delta > 0.0)) throw ConfigError("ldp.delta", "must be > 0");
  if (!(ldp.lambda >= 0.0)) throw ConfigError("ldp.lambda", "must be >= 0");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  o << "dataset.manifest = " << manifest.string() << '\n'
    << "seed = " << seed << '\n'
    << "model.d = " << model.d << '\n'
    << "model.share_gat_layers = " << bool_text(model.share_gat_layers) << '\n'
    << "model.use_relation_vectors = " << bool_text(model.use_relation_vectors) << '\n'
    << "train.batch_size = " << round.batch_size << '\n'
    << "train.eta = " << real_text(round.eta) << '\n'
    << "train.max_rounds = " << round.max_rounds << '\n'
    << "train.patience = " << round.patience << '\n'
    << "train.eval_every = " << round.eval_every << '\n'
    << "ldp.delta = " << real_text(ldp.delta) << '\n'
    << "ldp.lambda = " << real_text(ldp.lambda) << '\n'
    << "ldp.dynamic = " << bool_text(ldp.dynamic) << '\n'
    << "pseudo.p = " << pseudo_items << '\n'
    << "loss.denominator = " << (denominator == LossDenominator::kReal ? "real" : "union") << '\n'
    << "aggregation.mode = " << (aggregation == AggregationMode::kInteraction ? "interaction" : "per-entity")
    << '\n'
    << "eval.clamp = " << bool_text(clamp_eval) << '\n'
    << "output.dir = " << out_dir.string() << '\n';
  return o.str();
}

ConfigGrid ConfigGrid::parse(std::istream& in, const std::filesystem::path& base,
                             const std::string& source) {
  ConfigGrid g;
  g.base_ = base;
  for (auto& e : parse_kv(in, source)) {
    auto values = split_list(e.value);
    if (values.empty()) throw ConfigError(e.key, "empty value");
    g.override(e.key, std::move(values));
  }
  return g;
}

ConfigGrid ConfigGrid::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  return parse(in, path.parent_path(), path.string());
}

void ConfigGrid::override(const std::string& key, std::vector<std::string> values) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(values);
      return;
    }
  }
  entries_.emplace_back(key, std::move(values));
}

std::vector<std::string> ConfigGrid::grid_keys() const {
  std::vector<std::string> keys;
  for (const auto& [k, v] : entries_)
    if (v.size() > 1) keys.push_back(k);
  return keys;
}

std::vector<ExperimentConfig> ConfigGrid::expand() const {
  std::vector<ExperimentConfig> out;
  std::vector<std::size_t> idx(entries_.size(), 0);
  while (true) {
    ExperimentConfig cfg;
    cfg.out_dir = resolve(base_, "out");
    for (std::size_t i = 0; i < entries_.size(); ++i)
      cfg.set(entries_[i].first, entries_[i].second[idx[i]], base_);
    cfg.validate();
    out.push_back(std::move(cfg));
    // Odometer, last key fastest.
    std::size_t i = entries_.size();
    while (i > 0) {
      --i;
      if (++idx[i] < entries_[i].second.size()) break;
      idx[i] = 0;
      if (i == 0) return out;
    }
    if (entries_.empty()) return out;
  }
}

std::optional<std::string> axis_key(const std::string& axis) {
  static const std::map<std::string, std::string> kAxes = {
      {"batch_size", "train.batch_size"}, {"p", "pseudo.p"},        {"d", "model.d"},
      {"eta", "train.eta"},               {"delta", "ldp.delta"},   {"lambda", "ldp.lambda"}};
  const auto it = kAxes.find(axis);
  if (it == kAxes.end()) return std::nullopt;
  return it->second;
}

std::string git_blob_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string header = "blob " + std::to_string(content.size()) + '\0';

  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("sha1 failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

RunSummary run_experiment(const ExperimentConfig& cfg, const DatasetBundle& unsplit,
                          const RunOptions& opts) {
  cfg.validate();
  const auto split = split_dataset(unsplit, derive_seed(cfg.seed, Stream::kSplit));
  const auto graphs = build_local_graphs(split);
  auto theta = init_parameters(split.n_users, split.n_items, cfg.model,
                               derive_seed(cfg.seed, Stream::kInit));

  ServerConfig sc;
  sc.round = cfg.round;
  sc.client.ldp = cfg.ldp;
  sc.client.pseudo = {cfg.pseudo_items, split.scale};
  sc.client.denominator = cfg.denominator;
  sc.aggregation = cfg.aggregation;
  sc.eval = {cfg.clamp_eval, opts.threads};
  sc.seed = cfg.seed;
  sc.threads = opts.threads;

  std::ofstream round_log;
  if (opts.write_outputs) {
    std::filesystem::create_directories(cfg.out_dir);
    round_log.open(cfg.out_dir / "rounds.log");
  }
  auto observer = [&](const RoundTrace& rt, const ParameterSet&) {
    if (!round_log) return;
    round_log << "round=" << rt.round << " batch=" << rt.batch << " packets=" << rt.packets
              << " train_loss_mean=" << std::setprecision(10) << rt.train_loss_mean
              << " wall_ms=" << std::setprecision(4) << rt.wall_ms;
    if (!rt.note.empty()) round_log << " note=\"" << rt.note << '"';
    round_log << '\n';
  };

  auto result = run_server(std::move(theta), graphs, split.valid, sc, observer);

  RunSummary s;
  s.best_round = result.best_round;
  s.rounds_run = result.rounds_run;
  s.records = result.history;
  if (!result.history.empty()) {
    const auto d = early_stopper(result.history, cfg.round.patience);
    s.best_valid = result.history[d.best_index];
  }
  if (!split.test.empty() && result.rounds_run > 0) {
    s.test = evaluate(result.best, graphs, split.test, split.scale, sc.eval, result.best_round,
                      Split::kTest);
    s.records.push_back(s.test);
  }
  s.best = std::move(result.best);

  if (opts.log) {
    *opts.log << "rounds=" << s.rounds_run << " best_round=" << s.best_round
              << std::setprecision(6) << " best_valid_rmse=" << s.best_valid.rmse
              << " test_rmse=" << s.test.rmse << " test_mae=" << s.test.mae << '\n';
  }

  if (opts.write_outputs) {
    std::ofstream metrics(cfg.out_dir / "metrics.csv");
    write_metrics_csv(metrics, s.records);
    save_checkpoint(cfg.out_dir / "checkpoint.bin", s.best, s.best_round);

    std::ofstream manifest(cfg.out_dir / "run_manifest.txt");
    manifest << "# Resolved configuration. Re-run with: fesog run <this file> --out <dir>\n";
    const auto dm = DatasetManifest::load(cfg.manifest);
    manifest << "# input manifest " << git_blob_hash(cfg.manifest) << ' ' << cfg.manifest.string()
             << '\n'
             << "# input ratings " << git_blob_hash(dm.ratings) << ' ' << dm.ratings.string() << '\n'
             << "# input trust " << git_blob_hash(dm.trust) << ' ' << dm.trust.string() << '\n'
             << cfg.to_text();
  }
  return s;
}

RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  return run_experiment(cfg, load_dataset(DatasetManifest::load(cfg.manifest)), opts);
}

namespace {

struct DatasetCache {
  std::map<std::filesystem::path, DatasetBundle> loaded;

  const DatasetBundle& get(const std::filesystem::path& manifest) {
    auto it = loaded.find(manifest);
    if (it == loaded.end())
      it = loaded.emplace(manifest, load_dataset(DatasetManifest::load(manifest))).first;
    return it->second;
  }
};

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

void write_summary_header(std::ostream& out, const std::string& first) {
  out << first << ",best_round,best_valid_rmse,best_valid_mae,test_rmse,test_mae\n";
}

void write_summary_row(std::ostream& out, const std::string& first, const RunSummary& s) {
  out << first << ',' << s.best_round << ',' << std::setprecision(17) << s.best_valid.rmse << ','
      << s.best_valid.mae << ',' << s.test.rmse << ',' << s.test.mae << '\n';
}

template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    err << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

std::string value_of(const ExperimentConfig& cfg, const std::string& key) {
  std::istringstream in(cfg.to_text());
  for (const auto& e : parse_kv(in, "resolved"))
    if (e.key == key) return e.value;
  return {};
}

}  // namespace

int run_command(const std::filesystem::path& config, std::optional<std::filesystem::path> out,
                std::size_t threads, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    auto grid = ConfigGrid::load(config);
    if (out) grid.override("output.dir", {std::filesystem::absolute(*out).string()});
    const auto configs = grid.expand();
    DatasetCache cache;
    const RunOptions opts{threads, true, &log};

    if (configs.size() == 1) {
      run_experiment(configs.front(), cache.get(configs.front().manifest), opts);
      return 0;
    }

    // Grid search: one child directory per combination plus a summary.
    const auto keys = grid.grid_keys();
    const auto root = configs.front().out_dir;
    std::filesystem::create_directories(root);
    std::ofstream summary(root / "grid.csv");
    std::string header = "run";
    for (const auto& k : keys) header += "," + k;
    write_summary_header(summary, header);

    double best_rmse = std::numeric_limits<double>::infinity();
    std::string best_label;
    for (std::size_t i = 0; i < configs.size(); ++i) {
      auto cfg = configs[i];
      std::string label = std::to_string(i);
      std::string row = label;
      for (const auto& k : keys) {
        const auto v = value_of(cfg, k);
        label += "_" + slug(k) + "=" + slug(v);
        row += "," + v;
      }
      cfg.out_dir = root / label;
      log << "[grid " << (i + 1) << "/" << configs.size() << "] " << label << '\n';
      const auto s = run_experiment(cfg, cache.get(cfg.manifest), opts);
      write_summary_row(summary, row, s);
      if (s.best_valid.rmse < best_rmse) {
        best_rmse = s.best_valid.rmse;
        best_label = label;
      }
    }
    log << "best configuration by validation RMSE: " << best_label << '\n';
    return 0;
  });
}

int sweep_command(const std::filesystem::path& config, const std::string& axis,
                  const std::vector<std::string>& values,
                  std::optional<std::filesystem::path> out, std::size_t threads,
                  std::ostream& log, std::ostream& err) {
  const auto key = axis_key(axis);
  if (!key) {
    err << "unknown sweep axis '" << axis
        << "' (expected one of batch_size, p, d, eta, delta, lambda)\n";
    return 2;
  }
  return guarded(err, [&] {
    if (values.empty()) throw ConfigError(*key, "sweep needs at least one value");
    auto grid = ConfigGrid::load(config);
    if (out) grid.override("output.dir", {std::filesystem::absolute(*out).string()});
    for (const auto& k : grid.grid_keys())
      if (k != *key) throw ConfigError(k, "list values are not allowed in a sweep config");

    DatasetCache cache;
    const RunOptions opts{threads, true, &log};
    std::filesystem::path root;
    std::ostringstream rows;
    for (const auto& v : values) {
      grid.override(*key, {v});
      auto cfg = grid.expand().front();
      if (root.empty()) root = cfg.out_dir;
      cfg.out_dir = root / (axis + "_" + slug(v));
      log << "[sweep " << axis << "=" << v << "]\n";
      const auto s = run_experiment(cfg, cache.get(cfg.manifest), opts);
      write_summary_row(rows, v, s);
    }
    std::filesystem::create_directories(root);
    std::ofstream summary(root / ("sweep_" + axis + ".csv"));
    write_summary_header(summary, axis);
    summary << rows.str();
    return 0;
  });
}

}  // namespace fesog
