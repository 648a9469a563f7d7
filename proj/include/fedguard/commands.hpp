#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fedguard/config.hpp"

namespace fedguard {

/// Union of the options accepted by the CLI verbs.
struct CommandArgs {
  std::vector<std::filesystem::path> data;  // training sets (train, centralize, join) or eval set
  std::vector<std::filesystem::path> test;
  std::filesystem::path out;
  std::filesystem::path test_out;
  std::filesystem::path history;
  std::filesystem::path weights;
  std::optional<std::size_t> per_class;
  std::optional<std::size_t> test_per_class;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint16_t> port;
  std::uint16_t client_id = 1;
  std::string server;  // host:port
};

inline constexpr const char* kVerbs[] = {"simulate", "train", "centralize", "serve", "join", "evaluate", "report"};

/// Runs one verb. Library errors propagate as exceptions; `main` maps them to
/// a nonzero status. Returns 0 on success, 2 on a missing required argument.
int run_command(const std::string& verb, const ExperimentConfig& cfg, const CommandArgs& args, std::ostream& out,
                std::ostream& err);

/// Seed of the held-out split that `simulate` writes next to a training set.
std::uint64_t test_split_seed(std::uint64_t seed);

}  // namespace fedguard
