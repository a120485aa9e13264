#pragma once

// Run configuration file (JSON). Every key is optional and defaults to the
// value of a default-constructed RunConfig; unknown keys are errors.
//
// {
//   "network":  {"channels", "blocks", "upscale", "w_bits", "a_bits", "target_blocks"},
//   "training": {"total_iters", "batch_size", "patch_size", "lr_init", "lr_halve_at",
//                "lambda", "seed", "eval_interval", "prefetch", "shave"},
//   "ablation": {"rbd", "qsa", "sfd"},
//   "data":     {"train_dir", "val_dir", "synthetic_train", "synthetic_val",
//                "synthetic_size", "synthetic_seed"}
// }

#include <fstream>
#include <set>
#include <string>

#include "json.hpp"

#include "quantsr/dataset.hpp"
#include "quantsr/trainer.hpp"

namespace qsr {

struct DataConfig {
  std::string train_dir;  // HR PNG directory; empty: procedural images
  std::string val_dir;
  int synthetic_train = 8;
  int synthetic_val = 4;
  int synthetic_size = 96;  // HR side length
  std::uint64_t synthetic_seed = 1;
};

struct RunConfig {
  TrainConfig train;
  DataConfig data;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("config: unknown key '" + where + "." + it.key() + "'");
  }
}

template <class T>
void read_key(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: '" + where + "." + key + "' has the wrong type");
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig rc;
  detail::reject_unknown(j, {"network", "training", "ablation", "data"}, "config");
  TrainConfig& t = rc.train;
  if (j.contains("network")) {
    const auto& n = j.at("network");
    detail::reject_unknown(n, {"channels", "blocks", "upscale", "w_bits", "a_bits", "target_blocks"}, "network");
    detail::read_key(n, "channels", t.net.channels, "network");
    detail::read_key(n, "blocks", t.net.blocks, "network");
    detail::read_key(n, "upscale", t.net.upscale, "network");
    detail::read_key(n, "w_bits", t.net.w_bits, "network");
    detail::read_key(n, "a_bits", t.net.a_bits, "network");
    detail::read_key(n, "target_blocks", t.target_blocks, "network");
  }
  if (j.contains("training")) {
    const auto& n = j.at("training");
    detail::reject_unknown(n, {"total_iters", "batch_size", "patch_size", "lr_init", "lr_halve_at", "lambda", "seed",
                               "eval_interval", "prefetch", "shave"},
                           "training");
    detail::read_key(n, "total_iters", t.total_iters, "training");
    detail::read_key(n, "batch_size", t.batch_size, "training");
    detail::read_key(n, "patch_size", t.patch_size, "training");
    detail::read_key(n, "lr_init", t.lr_init, "training");
    detail::read_key(n, "lr_halve_at", t.lr_halve_at, "training");
    detail::read_key(n, "lambda", t.lambda, "training");
    detail::read_key(n, "seed", t.seed, "training");
    detail::read_key(n, "eval_interval", t.eval_interval, "training");
    detail::read_key(n, "prefetch", t.prefetch, "training");
    detail::read_key(n, "shave", t.shave, "training");
  }
  if (j.contains("ablation")) {
    const auto& n = j.at("ablation");
    detail::reject_unknown(n, {"rbd", "qsa", "sfd"}, "ablation");
    detail::read_key(n, "rbd", t.rbd, "ablation");
    detail::read_key(n, "qsa", t.qsa, "ablation");
    detail::read_key(n, "sfd", t.sfd, "ablation");
  }
  if (j.contains("data")) {
    const auto& n = j.at("data");
    detail::reject_unknown(n, {"train_dir", "val_dir", "synthetic_train", "synthetic_val", "synthetic_size", "synthetic_seed"},
                           "data");
    detail::read_key(n, "train_dir", rc.data.train_dir, "data");
    detail::read_key(n, "val_dir", rc.data.val_dir, "data");
    detail::read_key(n, "synthetic_train", rc.data.synthetic_train, "data");
    detail::read_key(n, "synthetic_val", rc.data.synthetic_val, "data");
    detail::read_key(n, "synthetic_size", rc.data.synthetic_size, "data");
    detail::read_key(n, "synthetic_seed", rc.data.synthetic_seed, "data");
  }
  return rc;
}

inline nlohmann::json data_config_to_json(const DataConfig& d) {
  return {{"train_dir", d.train_dir},           {"val_dir", d.val_dir},
          {"synthetic_train", d.synthetic_train}, {"synthetic_val", d.synthetic_val},
          {"synthetic_size", d.synthetic_size},   {"synthetic_seed", d.synthetic_seed}};
}

inline DataConfig data_config_from_json(const nlohmann::json& j) {
  return parse_run_config(nlohmann::json{{"data", j}}).data;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

/// Loads a dataset from a directory, or generates procedural images when dir is empty.
inline Dataset resolve_dataset(const std::string& dir, int count, int size, std::uint64_t seed, int scale) {
  if (!dir.empty()) return load_dataset(dir, scale);
  if (count < 1 || size < scale) throw ConfigError("synthetic dataset needs at least one image of at least scale pixels");
  return synthetic_dataset(count, size, scale, seed);
}

inline Dataset training_set(const RunConfig& rc) {
  return resolve_dataset(rc.data.train_dir, rc.data.synthetic_train, rc.data.synthetic_size, rc.data.synthetic_seed,
                         rc.train.net.upscale);
}

inline Dataset validation_set(const RunConfig& rc) {
  return resolve_dataset(rc.data.val_dir, rc.data.synthetic_val, rc.data.synthetic_size, rc.data.synthetic_seed + 7919,
                         rc.train.net.upscale);
}

}  // namespace qsr
