#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "fedguard/cnn.hpp"
#include "fedguard/dataset.hpp"
#include "fedguard/federation.hpp"
#include "fedguard/signal_model.hpp"

namespace fedguard {

/// Everything a run needs. Parsed from `key = value` lines:
///
///   n, dictionary (comma list), snr_db (number or inf), seed
///   grid | grid_height, grid_width, axis_range
///   preset (desk | literal), init_seed
///   lr, batch, epochs, local_epochs, beta1, beta2, epsilon, shuffle_seed
///   clients, rounds, host, port, handshake_timeout_s, io_timeout_s, throttle_bps
///   per_class, test_per_class, output_dir
///
/// `epochs` is the budget for standalone and centralized training,
/// `local_epochs` the per-round budget inside federation. When `rounds` is
/// absent it defaults to 10 for up to two clients and 15 otherwise.
struct ExperimentConfig {
  SimulationConfig simulation;
  RasterConfig raster;
  std::string preset = "desk";
  std::uint64_t init_seed = 1;
  TrainConfig train{0.001, 32, 10, 0.9, 0.999, 1e-8, 0};
  FederationConfig federation;
  std::size_t per_class = 2000;
  std::size_t test_per_class = 400;
  std::filesystem::path output_dir = ".";

  /// Preset filters on the raster grid.
  ModelSpec model_spec() const;
  TrainConfig local_train() const { return federation.train; }
};

/// Throws ConfigError naming the line for unknown keys, malformed or
/// out-of-range values.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace fedguard
