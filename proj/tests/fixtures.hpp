#pragma once

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "oracles.hpp"
#include "quantsr/quantsr.hpp"

namespace fixture {

inline qsr::NetworkSpec tiny_spec(int bits = 2, int upscale = 2) { return {8, 8, upscale, bits, bits}; }

/// Calibrated student built from a randomly initialized teacher.
inline qsr::Network student(const qsr::NetworkSpec& spec, qsr::QuantMethod method = qsr::QuantMethod::Rbd, bool qsa = true,
                            std::uint64_t seed = 3) {
  const qsr::Network teacher = qsr::build_teacher(spec, seed);
  qsr::StudentOptions opts;
  opts.method = method;
  opts.qsa = qsa;
  qsr::Network net = qsr::build_student(spec, opts, &teacher, seed + 1);
  std::mt19937_64 rng(seed + 2);
  qsr::calibrate_activations(net, oracle::random_tensor({2, 3, 10, 10}, rng, 0.0f, 1.0f));
  return net;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("quantsr_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline qsr::TrainConfig tiny_train_config(std::int64_t iters = 60) {
  qsr::TrainConfig c;
  c.net = tiny_spec();
  c.total_iters = iters;
  c.batch_size = 2;
  c.patch_size = 8;
  c.lr_init = 1e-3f;
  c.seed = 11;
  c.eval_interval = 5;
  return c;
}

}  // namespace fixture
