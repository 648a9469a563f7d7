// fedguard: simulate datasets, train detectors, and run federated averaging
// between a coordinator and base-station clients.

#include <CLI11.hpp>

#include <iostream>

#include "fedguard/commands.hpp"
#include "fedguard/errors.hpp"

int main(int argc, char** argv) {
  using namespace fedguard;

  CLI::App app{"Injection-attack detection with scatter-image CNNs and federated averaging"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);

  CommandArgs args;
  std::vector<std::string> data, test;
  std::string out, test_out, history, weights;
  std::size_t per_class = 0, test_per_class = 0;
  std::uint64_t seed = 0;
  std::uint16_t port = 0;

  auto* simulate = app.add_subcommand("simulate", "generate a labelled scatter-image dataset");
  simulate->add_option("-o,--out", out, "training set path (IGDS)");
  simulate->add_option("--test-out", test_out, "also write a held-out test set here");
  simulate->add_option("--per-class", per_class, "training images per class");
  simulate->add_option("--test-per-class", test_per_class, "test images per class");
  simulate->add_option("--seed", seed, "generation seed");

  auto* train = app.add_subcommand("train", "train a standalone detector on one dataset");
  auto* centralize = app.add_subcommand("centralize", "train one detector on the union of datasets");
  for (auto* cmd : {train, centralize}) {
    cmd->add_option("-d,--data", data, "training dataset(s)")->required();
    cmd->add_option("-t,--test", test, "test dataset(s) to report metrics on");
    cmd->add_option("-o,--out", out, "weights output (FLWT)");
    cmd->add_option("--history", history, "per-epoch loss/accuracy CSV");
  }

  auto* serve = app.add_subcommand("serve", "run the federated-averaging coordinator");
  serve->add_option("-o,--out", out, "final global weights (FLWT)");
  serve->add_option("--history", history, "per-round per-client metrics CSV");
  serve->add_option("-p,--port", port, "listen port (0 = ephemeral)");

  auto* join = app.add_subcommand("join", "run one base-station client");
  join->add_option("--client-id", args.client_id, "client id")->required();
  join->add_option("-d,--data", data, "local training set")->required();
  join->add_option("-t,--test", test, "local test set")->required();
  join->add_option("-s,--server", args.server, "coordinator host:port");
  join->add_option("-p,--port", port, "coordinator port on the configured host");

  auto* evaluate = app.add_subcommand("evaluate", "report detection metrics of a weight file");
  evaluate->add_option("-w,--weights", weights, "weights (FLWT)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("-d,--data", data, "dataset(s)")->required();
  evaluate->add_option("-o,--out", out, "metrics text output");

  auto* report = app.add_subcommand("report", "re-export and summarise a federation history");
  report->add_option("--history", history, "history CSV written by serve")->required()->check(CLI::ExistingFile);
  report->add_option("-o,--out", out, "sorted CSV output");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = config_path.empty() ? parse_config("") : load_config(config_path);
    for (const auto& d : data) args.data.emplace_back(d);
    for (const auto& t : test) args.test.emplace_back(t);
    args.out = out;
    args.test_out = test_out;
    args.history = history;
    args.weights = weights;
    if (simulate->count("--per-class")) args.per_class = per_class;
    if (simulate->count("--test-per-class")) args.test_per_class = test_per_class;
    if (simulate->count("--seed")) args.seed = seed;
    if (serve->count("--port") || join->count("--port")) args.port = port;

    const std::string verb = app.get_subcommands().front()->get_name();
    return run_command(verb, cfg, args, std::cout, std::cerr);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 1;
  }
}
