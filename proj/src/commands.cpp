#include "fedguard/commands.hpp"

#include <cstdio>
#include <map>

#include "fedguard/errors.hpp"
#include "fedguard/io.hpp"

namespace fedguard {

std::uint64_t test_split_seed(std::uint64_t seed) { return mix_seed(seed, 0x7e57); }

namespace {

namespace fs = std::filesystem;

fs::path or_default(const fs::path& given, const ExperimentConfig& cfg, const char* name) {
  return given.empty() ? cfg.output_dir / name : given;
}

LabeledDataset load_all(const std::vector<fs::path>& paths) {
  std::vector<LabeledDataset> parts;
  for (const fs::path& p : paths) parts.push_back(load_dataset(p));
  return parts.size() == 1 ? std::move(parts.front()) : merge_datasets(parts);
}

std::string epoch_history_csv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,loss,accuracy\n";
  char buf[96];
  for (std::size_t e = 0; e < history.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e + 1, history[e].loss, history[e].accuracy);
    out += buf;
  }
  return out;
}

int simulate(const ExperimentConfig& cfg, const CommandArgs& args, std::ostream& out) {
  const std::uint64_t seed = args.seed.value_or(cfg.simulation.seed);
  const fs::path train_path = or_default(args.out, cfg, "train.igds");
  const auto train_set = generate_dataset(cfg.simulation, cfg.raster, args.per_class.value_or(cfg.per_class), seed);
  const std::size_t bytes = save_dataset(train_set, train_path);
  out << "wrote " << train_set.size() << " records (" << bytes << " bytes) to " << train_path.string() << "\n";
  if (!args.test_out.empty()) {
    const auto test_set = generate_dataset(cfg.simulation, cfg.raster,
                                           args.test_per_class.value_or(cfg.test_per_class), test_split_seed(seed));
    const std::size_t tb = save_dataset(test_set, args.test_out);
    out << "wrote " << test_set.size() << " records (" << tb << " bytes) to " << args.test_out.string() << "\n";
  }
  return 0;
}

int train_standalone(const ExperimentConfig& cfg, const CommandArgs& args, std::ostream& out, const char* weights_name) {
  const LabeledDataset data = load_all(args.data);
  ModelSpec spec = cfg.model_spec();
  spec.height = data.raster.height;
  spec.width = data.raster.width;
  const TrainResult trained = train(build_model(spec, cfg.init_seed), {}, data.images, cfg.train);

  const fs::path weights_path = or_default(args.out, cfg, weights_name);
  save_weights(trained.weights, weights_path);
  const fs::path history_path = or_default(args.history, cfg, "train_history.csv");
  write_file_atomic(history_path, epoch_history_csv(trained.history));
  out << "trained " << trained.history.size() << " epochs on " << data.size() << " images; weights -> "
      << weights_path.string() << "\n";
  if (!args.test.empty()) {
    const LabeledDataset test = load_all(args.test);
    out << format_report(derive_metrics(evaluate(trained.weights, test.images)));
  }
  return 0;
}

int serve(const ExperimentConfig& cfg, const CommandArgs& args, std::ostream& out) {
  FederationConfig fed = cfg.federation;
  if (args.port) fed.port = *args.port;
  Coordinator coordinator(fed);
  out << "listening on " << fed.host << ":" << coordinator.port() << " for " << fed.clients << " clients, "
      << fed.rounds << " rounds" << std::endl;
  coordinator.set_observer([&out](const CoordinatorEvent& e) {
    if (e.kind == CoordinatorEvent::Kind::aggregated) out << "round " << e.round << " aggregated" << std::endl;
  });
  const CoordinatorResult result = coordinator.run(build_model(cfg.model_spec(), cfg.init_seed));
  const fs::path weights_path = or_default(args.out, cfg, "global.flwt");
  save_weights(result.global, weights_path);
  const fs::path history_path = or_default(args.history, cfg, "history.csv");
  export_history(result.history, history_path);
  out << "global weights -> " << weights_path.string() << ", history -> " << history_path.string() << "\n";
  return 0;
}

int join(const ExperimentConfig& cfg, const CommandArgs& args, std::ostream& out) {
  std::string host = cfg.federation.host;
  std::uint16_t port = args.port.value_or(cfg.federation.port);
  if (!args.server.empty()) {
    const auto colon = args.server.rfind(':');
    if (colon == std::string::npos) throw InvalidInput("server must be host:port");
    host = args.server.substr(0, colon);
    port = std::uint16_t(std::stoul(args.server.substr(colon + 1)));
  }
  ClientConfig client;
  client.client_id = args.client_id;
  client.train = cfg.local_train();
  client.io_timeout = cfg.federation.io_timeout;
  client.throttle = cfg.federation.throttle;
  const ClientResult result = run_client(client, load_all(args.data), load_all(args.test), host, port);
  char buf[96];
  std::snprintf(buf, sizeof buf, "client %u finished %u rounds, final accuracy %.4f\n", unsigned(args.client_id),
                unsigned(result.rounds), result.final_accuracy);
  out << buf;
  return 0;
}

int evaluate_cmd(const ExperimentConfig& cfg, const CommandArgs& args, std::ostream& out) {
  const ModelWeights weights = load_weights(args.weights);
  const LabeledDataset data = load_all(args.data);
  const ConfusionMatrix cm = evaluate(weights, data.images);
  const std::string report = format_report(derive_metrics(cm));
  out << report;
  write_file_atomic(or_default(args.out, cfg, "metrics.txt"), report);
  return 0;
}

int report(const ExperimentConfig& cfg, const CommandArgs& args, std::ostream& out) {
  const auto history = load_history(args.history);
  if (history.empty()) throw InvalidInput("history is empty");
  const std::size_t rows = export_history(history, or_default(args.out, cfg, "report.csv"));

  std::uint32_t last = 0;
  for (const HistoryRecord& r : history) last = std::max(last, r.round);
  std::map<std::uint16_t, double> final_acc;
  for (const HistoryRecord& r : history)
    if (r.round == last) final_acc[r.client_id] = r.accuracy;
  double mean = 0.0;
  char buf[96];
  for (const auto& [id, acc] : final_acc) {
    std::snprintf(buf, sizeof buf, "client %u round %u accuracy %.4f\n", unsigned(id), unsigned(last), acc);
    out << buf;
    mean += acc;
  }
  std::snprintf(buf, sizeof buf, "mean final accuracy %.4f over %zu clients (%zu rows)\n",
                mean / double(final_acc.size()), final_acc.size(), rows);
  out << buf;
  return 0;
}

bool need(bool ok, const char* what, std::ostream& err) {
  if (!ok) err << "missing required argument: " << what << "\n";
  return ok;
}

}  // namespace

int run_command(const std::string& verb, const ExperimentConfig& cfg, const CommandArgs& args, std::ostream& out,
                std::ostream& err) {
  if (verb == "simulate") return simulate(cfg, args, out);
  if (verb == "train") {
    if (!need(args.data.size() == 1, "exactly one --data", err)) return 2;
    return train_standalone(cfg, args, out, "standalone.flwt");
  }
  if (verb == "centralize") {
    if (!need(!args.data.empty(), "--data", err)) return 2;
    return train_standalone(cfg, args, out, "central.flwt");
  }
  if (verb == "serve") return serve(cfg, args, out);
  if (verb == "join") {
    if (!need(!args.data.empty() && !args.test.empty(), "--data and --test", err)) return 2;
    return join(cfg, args, out);
  }
  if (verb == "evaluate") {
    if (!need(!args.weights.empty() && !args.data.empty(), "--weights and --data", err)) return 2;
    return evaluate_cmd(cfg, args, out);
  }
  if (verb == "report") {
    if (!need(!args.history.empty(), "--history", err)) return 2;
    return report(cfg, args, out);
  }
  err << "unknown command '" << verb << "'\n";
  return 2;
}

}  // namespace fedguard
