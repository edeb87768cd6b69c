#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "fesog/checkpoint.hpp"
#include "fesog/experiment.hpp"
#include "fesog/synthetic.hpp"
#include "fesog/wire.hpp"

namespace py = pybind11;
using namespace fesog;

namespace {

py::array_t<double> to_array(std::span<const double> xs, std::size_t rows, std::size_t cols) {
  py::array_t<double> out(rows == 0 ? std::vector<py::ssize_t>{static_cast<py::ssize_t>(cols)}
                                    : std::vector<py::ssize_t>{static_cast<py::ssize_t>(rows),
                                                               static_cast<py::ssize_t>(cols)});
  std::copy(xs.begin(), xs.end(), out.mutable_data());
  return out;
}

Vec to_vec(const py::handle& h) {
  const auto a = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(h);
  if (!a) throw py::type_error("expected a float array");
  return Vec(a.data(), a.data() + a.size());
}

bool is_matrix(WeightTag tag) {
  return tag == WeightTag::kWSocial || tag == WeightTag::kWItem || tag == WeightTag::kWHidden;
}

// Maps a CLI-style exit status to a Python exception.
std::string check_status(int code, const std::ostringstream& log, const std::ostringstream& err) {
  if (code == 2) throw ConfigError("config", err.str());
  if (code != 0) throw std::runtime_error(err.str());
  return log.str();
}

py::dict record_dict(const MetricsRecord& r) {
  py::dict d;
  d["round"] = r.round;
  d["split"] = std::string(split_name(r.split));
  d["rmse"] = r.rmse;
  d["mae"] = r.mae;
  d["n"] = r.n_ratings;
  return d;
}

py::dict packet_dict(const ClientMessage& m) {
  const auto& p = m.packet;
  py::dict model, items, users, item_counts, user_counts;
  const std::size_t d = p.model_grads.w_social.rows();
  for (auto tag : kAllWeightTags) {
    const auto t = p.model_grads.tensor(tag);
    model[py::str(std::string(weight_name(tag)))] = is_matrix(tag) ? to_array(t, d, d) : to_array(t, 0, t.size());
  }
  for (const auto& [id, v] : p.item_grads) items[py::int_(id)] = to_array(v, 0, v.size());
  for (const auto& [id, v] : p.user_grads) users[py::int_(id)] = to_array(v, 0, v.size());
  for (const auto& [id, c] : p.item_counts) item_counts[py::int_(id)] = c;
  for (const auto& [id, c] : p.user_counts) user_counts[py::int_(id)] = c;
  py::dict out;
  out["round"] = m.round;
  out["owner"] = p.owner;
  out["interaction_count"] = p.interaction_count;
  out["model_grads"] = model;
  out["item_grads"] = items;
  out["user_grads"] = users;
  out["item_counts"] = item_counts;
  out["user_counts"] = user_counts;
  return out;
}

ClientMessage packet_from_dict(const py::dict& in) {
  ClientMessage m;
  m.round = in.contains("round") ? in["round"].cast<std::uint64_t>() : 0;
  auto& p = m.packet;
  p.owner = in["owner"].cast<UserId>();
  p.interaction_count = in["interaction_count"].cast<double>();
  const auto model = in["model_grads"].cast<py::dict>();
  const auto d = to_vec(model["rel_self"]).size();
  p.model_grads = ModelWeights::zeros(d);
  for (auto tag : kAllWeightTags) {
    const auto v = to_vec(model[py::str(std::string(weight_name(tag)))]);
    auto dst = p.model_grads.tensor(tag);
    if (v.size() != dst.size()) throw py::value_error(std::string(weight_name(tag)) + ": wrong size");
    std::copy(v.begin(), v.end(), dst.begin());
  }
  for (const auto& [k, v] : in["item_grads"].cast<py::dict>()) p.item_grads[k.cast<ItemId>()] = to_vec(v);
  for (const auto& [k, v] : in["user_grads"].cast<py::dict>()) p.user_grads[k.cast<UserId>()] = to_vec(v);
  for (const auto& [k, v] : in["item_counts"].cast<py::dict>()) p.item_counts[k.cast<ItemId>()] = v.cast<double>();
  for (const auto& [k, v] : in["user_counts"].cast<py::dict>()) p.user_counts[k.cast<UserId>()] = v.cast<double>();
  return m;
}

}  // namespace

PYBIND11_MODULE(_fesog, m) {
  m.doc() = "Federated social recommendation simulator";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      config_error(e.what());
    }
  });

  m.def(
      "run",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out, std::size_t threads) {
        std::ostringstream log, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_command(config, out, threads, log, err);
        }
        return check_status(code, log, err);
      },
      py::arg("config"), py::arg("out") = py::none(), py::arg("threads") = 1,
      "Runs a config file (or its grid) and returns the progress log.");

  m.def(
      "sweep",
      [](const std::filesystem::path& config, const std::string& axis, const std::vector<std::string>& values,
         std::optional<std::filesystem::path> out, std::size_t threads) {
        std::ostringstream log, err;
        int code;
        {
          py::gil_scoped_release release;
          code = sweep_command(config, axis, values, out, threads, log, err);
        }
        return check_status(code, log, err);
      },
      py::arg("config"), py::arg("axis"), py::arg("values"), py::arg("out") = py::none(),
      py::arg("threads") = 1, "Runs one child experiment per axis value and writes a summary CSV.");

  m.def(
      "train",
      [](const std::filesystem::path& config, std::size_t threads, bool write_outputs) {
        const auto configs = ConfigGrid::load(config).expand();
        if (configs.size() != 1) throw ConfigError("config", "train expects a single configuration");
        RunSummary s;
        {
          py::gil_scoped_release release;
          s = run_experiment(configs.front(), {.threads = threads, .write_outputs = write_outputs});
        }
        py::list records;
        for (const auto& r : s.records) records.append(record_dict(r));
        py::dict out;
        out["best_round"] = s.best_round;
        out["rounds_run"] = s.rounds_run;
        out["best_valid"] = record_dict(s.best_valid);
        out["test"] = record_dict(s.test);
        out["records"] = records;
        return out;
      },
      py::arg("config"), py::arg("threads") = 1, py::arg("write_outputs") = false,
      "Trains a single configuration and returns its metrics.");

  m.def(
      "write_synthetic",
      [](const std::filesystem::path& dir, std::size_t users, std::size_t items, std::size_t ratings_per_user,
         std::uint64_t seed) {
        SyntheticSpec spec;
        spec.n_users = users;
        spec.n_items = items;
        spec.ratings_per_user = ratings_per_user;
        const auto b = synthetic_dataset(spec, seed);
        std::filesystem::create_directories(dir);
        write_dataset(b, dir / "ratings.txt", dir / "trust.txt");
        std::ofstream(dir / "synthetic.manifest")
            << "name = synthetic\nratings = ratings.txt\ntrust = trust.txt\nrating_min = " << spec.scale.min
            << "\nrating_max = " << spec.scale.max << '\n';
        py::dict out;
        out["manifest"] = dir / "synthetic.manifest";
        out["users"] = b.n_users;
        out["items"] = b.n_items;
        out["ratings"] = b.ratings.size();
        out["links"] = b.social.size();
        return out;
      },
      py::arg("dir"), py::arg("users") = 200, py::arg("items") = 300, py::arg("ratings_per_user") = 20,
      py::arg("seed") = 1, "Writes a synthetic dataset and its manifest into `dir`.");

  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& path) {
        const auto ck = load_checkpoint(path);
        const auto& p = ck.params;
        const std::size_t d = p.dim();
        py::dict tensors;
        tensors["user_embedding"] = to_array(p.users.flat(), p.n_users(), d);
        tensors["item_embedding"] = to_array(p.items.flat(), p.n_items(), d);
        for (auto tag : kAllWeightTags) {
          const auto t = p.model.tensor(tag);
          tensors[py::str(std::string(weight_name(tag)))] = is_matrix(tag) ? to_array(t, d, d) : to_array(t, 0, t.size());
        }
        py::dict out;
        out["round"] = ck.round;
        out["d"] = d;
        out["share_gat_layers"] = p.cfg.share_gat_layers;
        out["use_relation_vectors"] = p.cfg.use_relation_vectors;
        out["tensors"] = tensors;
        return out;
      },
      py::arg("path"), "Reads a checkpoint into numpy arrays.");

  m.def(
      "decode_packet", [](const py::bytes& data) { return packet_dict(decode_message(std::string(data))); },
      py::arg("data"), "Decodes a wire-format gradient packet.");
  m.def(
      "encode_packet", [](const py::dict& packet) { return py::bytes(encode_message(packet_from_dict(packet))); },
      py::arg("packet"), "Encodes a gradient packet dict in the wire format.");
}
