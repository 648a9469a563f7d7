#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fedguard/cnn.hpp"
#include "fedguard/metrics.hpp"
#include "fedguard/throttle.hpp"
#include "fedguard/transport.hpp"
#include "fedguard/wire.hpp"

namespace fedguard {

struct ClientUpdate {
  std::uint64_t sample_count = 0;
  ModelWeights weights;
};

/// Sample-weighted coordinate mean, computed as w_0 + sum_k (n_k / n)(w_k - w_0)
/// so identical inputs come back unchanged. Throws InvalidInput on an empty
/// list or a zero count and AggregationError on shape mismatch.
ModelWeights fedavg(std::span<const ClientUpdate> updates);

enum class RoundPhase : std::uint8_t { collecting, aggregating, distributing, done };

/// Bookkeeping for one synchronous round with full participation.
class RoundState {
 public:
  RoundState(std::uint32_t round, std::set<std::uint16_t> expected);

  std::uint32_t round() const { return round_; }
  RoundPhase phase() const { return phase_; }
  const std::set<std::uint16_t>& expected() const { return expected_; }
  std::size_t received() const { return uploads_.size(); }
  bool complete() const { return uploads_.size() == expected_.size(); }

  /// Throws ProtocolError for unknown or duplicate clients or outside collection.
  void add_upload(std::uint16_t client_id, ClientUpdate update);

  /// FedAvg over uploads in ascending client order. Throws AggregationError
  /// unless every expected client has uploaded.
  ModelWeights aggregate();

  void mark_distributed();
  void mark_done();

 private:
  std::uint32_t round_;
  std::set<std::uint16_t> expected_;
  std::map<std::uint16_t, ClientUpdate> uploads_;
  RoundPhase phase_ = RoundPhase::collecting;
};

struct FederationConfig {
  std::uint16_t clients = 2;
  std::uint32_t rounds = 10;
  TrainConfig train;  // per-client local training; epochs = local epochs per round
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::chrono::milliseconds handshake_timeout{60'000};
  std::chrono::milliseconds io_timeout{600'000};
  ThrottleConfig throttle;

  /// 10 rounds for up to two clients, 15 beyond.
  static std::uint32_t default_rounds(std::uint16_t clients) { return clients <= 2 ? 10 : 15; }
  void validate() const;
};

// Payload codecs shared by coordinator and client.
Bytes encode_upload(std::uint64_t sample_count, const ModelWeights& w);
ClientUpdate decode_upload(std::span<const std::uint8_t> payload);
Bytes encode_matrix(const ConfusionMatrix& cm);
ConfusionMatrix decode_matrix(std::span<const std::uint8_t> payload);

struct CoordinatorEvent {
  enum class Kind : std::uint8_t { client_joined, upload_serviced, aggregated, metrics_received, shutdown };
  Kind kind;
  std::uint32_t round = 0;
  std::uint16_t client_id = 0;
  std::size_t uploads_received = 0;
};

struct CoordinatorResult {
  ModelWeights global;
  std::vector<HistoryRecord> history;
  std::vector<ModelWeights> round_globals;  // global model after each round
};

/// Server-station. Binds on construction so the port is known before clients
/// start. Each round: ROUND_START to every client, WEIGHTS_UPLOAD serviced one
/// client at a time in ascending id order, FedAvg, GLOBAL_UPDATE to every
/// client, METRICS_REPORT collected. SHUTDOWN after the last round.
class Coordinator {
 public:
  explicit Coordinator(FederationConfig cfg);

  std::uint16_t port() const { return listener_.port(); }
  void set_observer(std::function<void(const CoordinatorEvent&)> observer) { observer_ = std::move(observer); }

  /// Throws TransportError (round and client named) when a client times out
  /// or disconnects; the affected round is not aggregated.
  CoordinatorResult run(const ModelWeights& initial);

 private:
  struct Peer {
    std::uint16_t id;
    std::unique_ptr<TcpStream> socket;
    std::unique_ptr<ThrottledStream> stream;
  };

  void handshake();
  WireMessage expect(Peer& peer, MessageType type, std::uint32_t round);
  void send(Peer& peer, const WireMessage& msg, std::uint32_t round);
  void notify(const CoordinatorEvent& e) {
    if (observer_) observer_(e);
  }

  FederationConfig cfg_;
  TcpListener listener_;
  std::vector<Peer> peers_;
  std::function<void(const CoordinatorEvent&)> observer_;
};

CoordinatorResult run_coordinator(const FederationConfig& cfg, const ModelWeights& initial);

struct ClientConfig {
  std::uint16_t client_id = 1;
  TrainConfig train;
  std::size_t connect_retries = 50;
  std::chrono::milliseconds retry_delay{200};
  std::chrono::milliseconds io_timeout{600'000};
  ThrottleConfig throttle;
};

struct ClientResult {
  double final_accuracy = 0.0;
  ConfusionMatrix final_matrix;
  std::uint32_t rounds = 0;
  std::vector<Bytes> uploads;  // serialized weights sent each round
};

/// Base-station. Per round: take the global model, train train.epochs local
/// epochs (shuffle seed mixed with round and client id), upload, adopt the
/// GLOBAL_UPDATE, evaluate on `test`, report. Optimizer moments persist across
/// rounds. Throws TransportError when the server is unreachable after retries
/// or the connection drops.
ClientResult run_client(const ClientConfig& cfg, const LabeledDataset& train_set, const LabeledDataset& test_set,
                        const std::string& host, std::uint16_t port);

/// Shuffle seed a client uses for a given round.
std::uint64_t round_shuffle_seed(std::uint64_t base, std::uint32_t round, std::uint16_t client_id);

}  // namespace fedguard
