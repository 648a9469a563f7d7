#include "fedguard/federation.hpp"

#include <algorithm>
#include <thread>

#include "fedguard/errors.hpp"
#include "fedguard/random.hpp"

namespace fedguard {

ModelWeights fedavg(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw InvalidInput("no updates to aggregate");
  const ModelWeights& anchor = updates.front().weights;
  double total = 0.0;
  for (const ClientUpdate& u : updates) {
    if (u.sample_count == 0) throw InvalidInput("sample count must be >= 1");
    if (u.weights.tensors.size() != anchor.tensors.size()) throw AggregationError("tensor count mismatch");
    for (std::size_t t = 0; t < anchor.tensors.size(); ++t)
      if (u.weights.tensors[t].shape != anchor.tensors[t].shape ||
          u.weights.tensors[t].values.size() != anchor.tensors[t].values.size())
        throw AggregationError("tensor shape mismatch at index " + std::to_string(t));
    total += double(u.sample_count);
  }

  ModelWeights out = anchor;
  for (std::size_t k = 1; k < updates.size(); ++k) {
    const double share = double(updates[k].sample_count) / total;
    for (std::size_t t = 0; t < out.tensors.size(); ++t) {
      auto& dst = out.tensors[t].values;
      const auto& src = updates[k].weights.tensors[t].values;
      const auto& base = anchor.tensors[t].values;
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += share * (src[i] - base[i]);
    }
  }
  return out;
}

RoundState::RoundState(std::uint32_t round, std::set<std::uint16_t> expected)
    : round_(round), expected_(std::move(expected)) {
  if (expected_.empty()) throw InvalidInput("round needs at least one client");
}

void RoundState::add_upload(std::uint16_t client_id, ClientUpdate update) {
  if (phase_ != RoundPhase::collecting) throw ProtocolError("round is no longer collecting uploads");
  if (!expected_.contains(client_id)) throw ProtocolError("unexpected client " + std::to_string(client_id));
  if (uploads_.contains(client_id)) throw ProtocolError("duplicate upload from client " + std::to_string(client_id));
  uploads_.emplace(client_id, std::move(update));
}

ModelWeights RoundState::aggregate() {
  if (phase_ != RoundPhase::collecting) throw AggregationError("round already aggregated");
  if (!complete())
    throw AggregationError("round " + std::to_string(round_) + " has " + std::to_string(uploads_.size()) + " of " +
                           std::to_string(expected_.size()) + " uploads");
  phase_ = RoundPhase::aggregating;
  std::vector<ClientUpdate> ordered;
  ordered.reserve(uploads_.size());
  for (auto& [id, update] : uploads_) ordered.push_back(std::move(update));
  uploads_.clear();
  return fedavg(ordered);
}

void RoundState::mark_distributed() {
  if (phase_ != RoundPhase::aggregating) throw ProtocolError("nothing to distribute");
  phase_ = RoundPhase::distributing;
}

void RoundState::mark_done() {
  if (phase_ != RoundPhase::distributing) throw ProtocolError("round not distributed");
  phase_ = RoundPhase::done;
}

void FederationConfig::validate() const {
  if (clients == 0) throw InvalidInput("client count must be >= 1");
  if (rounds == 0) throw InvalidInput("rounds must be >= 1");
  train.validate();
}

Bytes encode_upload(std::uint64_t sample_count, const ModelWeights& w) {
  Bytes out;
  ByteWriter(out).put<std::uint64_t>(sample_count);
  const Bytes body = serialize_weights(w);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

ClientUpdate decode_upload(std::span<const std::uint8_t> payload) {
  ByteReader<ProtocolError> r(payload);
  ClientUpdate u;
  u.sample_count = r.get<std::uint64_t>();
  u.weights = deserialize_weights(payload.subspan(8));
  return u;
}

Bytes encode_matrix(const ConfusionMatrix& cm) {
  Bytes out;
  ByteWriter w(out);
  for (std::uint64_t v : {cm.tp, cm.tn, cm.fp, cm.fn}) w.put<std::uint64_t>(v);
  return out;
}

ConfusionMatrix decode_matrix(std::span<const std::uint8_t> payload) {
  if (payload.size() != 32) throw ProtocolError("metrics payload must be 32 bytes");
  ByteReader<ProtocolError> r(payload);
  ConfusionMatrix cm;
  cm.tp = r.get<std::uint64_t>();
  cm.tn = r.get<std::uint64_t>();
  cm.fp = r.get<std::uint64_t>();
  cm.fn = r.get<std::uint64_t>();
  return cm;
}

std::uint64_t round_shuffle_seed(std::uint64_t base, std::uint32_t round, std::uint16_t client_id) {
  return mix_seed(mix_seed(base, round), client_id);
}

namespace {

// The wire carries float32; keep the coordinator's copy identical to what
// clients receive.
ModelWeights wire_precision(const ModelWeights& w) { return deserialize_weights(serialize_weights(w)); }

std::string where(std::uint32_t round, std::uint16_t client) {
  return "round " + std::to_string(round) + ", client " + std::to_string(client) + ": ";
}

}  // namespace

Coordinator::Coordinator(FederationConfig cfg) : cfg_(std::move(cfg)), listener_(cfg_.host, cfg_.port) {
  cfg_.validate();
}

void Coordinator::handshake() {
  const auto deadline = std::chrono::steady_clock::now() + cfg_.handshake_timeout;
  while (peers_.size() < cfg_.clients) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0)
      throw TimeoutError("handshake timed out with " + std::to_string(peers_.size()) + " of " +
                         std::to_string(cfg_.clients) + " clients");
    Peer peer{0, listener_.accept(left), nullptr};
    peer.socket->set_timeout(cfg_.io_timeout);
    peer.stream = std::make_unique<ThrottledStream>(*peer.socket, cfg_.throttle);
    const WireMessage hello = read_message(*peer.stream);
    if (hello.type != MessageType::hello) throw ProtocolError("expected HELLO, got " + std::string(to_string(hello.type)));
    peer.id = hello.client_id;
    for (const Peer& p : peers_)
      if (p.id == peer.id) throw ProtocolError("duplicate client id " + std::to_string(peer.id));
    Bytes ack;
    ByteWriter(ack).put<std::uint32_t>(cfg_.rounds);
    write_message(*peer.stream, {MessageType::hello_ack, 0, peer.id, ack});
    notify({CoordinatorEvent::Kind::client_joined, 0, peer.id, 0});
    peers_.push_back(std::move(peer));
  }
  std::sort(peers_.begin(), peers_.end(), [](const Peer& a, const Peer& b) { return a.id < b.id; });
}

WireMessage Coordinator::expect(Peer& peer, MessageType type, std::uint32_t round) {
  WireMessage msg;
  try {
    msg = read_message(*peer.stream);
  } catch (const TimeoutError& e) {
    throw TimeoutError(where(round, peer.id) + e.what());
  } catch (const Error& e) {
    throw TransportError(where(round, peer.id) + e.what());
  }
  if (msg.type != type || msg.round != round || msg.client_id != peer.id)
    throw ProtocolError(where(round, peer.id) + "expected " + std::string(to_string(type)) + ", got " +
                        std::string(to_string(msg.type)));
  return msg;
}

void Coordinator::send(Peer& peer, const WireMessage& msg, std::uint32_t round) {
  try {
    write_message(*peer.stream, msg);
  } catch (const Error& e) {
    throw TransportError(where(round, peer.id) + e.what());
  }
}

CoordinatorResult Coordinator::run(const ModelWeights& initial) {
  handshake();
  std::set<std::uint16_t> ids;
  for (const Peer& p : peers_) ids.insert(p.id);

  CoordinatorResult result;
  result.global = wire_precision(initial);
  for (std::uint32_t round = 1; round <= cfg_.rounds; ++round) {
    const Bytes start = serialize_weights(result.global);
    for (Peer& p : peers_) send(p, {MessageType::round_start, round, p.id, start}, round);

    RoundState state(round, ids);
    for (Peer& p : peers_) {
      const WireMessage upload = expect(p, MessageType::weights_upload, round);
      ClientUpdate update;
      try {
        update = decode_upload(upload.payload);
      } catch (const Error& e) {
        throw ProtocolError(where(round, p.id) + e.what());
      }
      state.add_upload(p.id, std::move(update));
      notify({CoordinatorEvent::Kind::upload_serviced, round, p.id, state.received()});
    }
    const std::size_t received = state.received();
    result.global = wire_precision(state.aggregate());
    notify({CoordinatorEvent::Kind::aggregated, round, 0, received});

    const Bytes update = serialize_weights(result.global);
    for (Peer& p : peers_) send(p, {MessageType::global_update, round, p.id, update}, round);
    state.mark_distributed();

    for (Peer& p : peers_) {
      const WireMessage report = expect(p, MessageType::metrics_report, round);
      ConfusionMatrix cm;
      try {
        cm = decode_matrix(report.payload);
        result.history.push_back(HistoryRecord::from_matrix(round, p.id, cm));
      } catch (const Error& e) {
        throw ProtocolError(where(round, p.id) + e.what());
      }
      notify({CoordinatorEvent::Kind::metrics_received, round, p.id, 0});
    }
    state.mark_done();
    result.round_globals.push_back(result.global);
  }
  for (Peer& p : peers_) send(p, {MessageType::shutdown, cfg_.rounds, p.id, {}}, cfg_.rounds);
  notify({CoordinatorEvent::Kind::shutdown, cfg_.rounds, 0, 0});
  return result;
}

CoordinatorResult run_coordinator(const FederationConfig& cfg, const ModelWeights& initial) {
  Coordinator coordinator(cfg);
  return coordinator.run(initial);
}

ClientResult run_client(const ClientConfig& cfg, const LabeledDataset& train_set, const LabeledDataset& test_set,
                        const std::string& host, std::uint16_t port) {
  cfg.train.validate();
  if (train_set.empty() || test_set.empty()) throw InvalidInput("client needs non-empty train and test sets");

  std::unique_ptr<TcpStream> socket;
  for (std::size_t attempt = 0; !socket; ++attempt) {
    try {
      socket = TcpStream::connect(host, port);
    } catch (const TransportError&) {
      if (attempt >= cfg.connect_retries) throw;
      std::this_thread::sleep_for(cfg.retry_delay);
    }
  }
  socket->set_timeout(cfg.io_timeout);
  ThrottledStream stream(*socket, cfg.throttle);

  const auto fail = [&](const std::string& what) {
    return TransportError("client " + std::to_string(cfg.client_id) + ": " + what);
  };

  ClientResult result;
  ModelWeights weights;
  OptimizerState optimizer;
  try {
    write_message(stream, {MessageType::hello, 0, cfg.client_id, {}});
    const WireMessage ack = read_message(stream);
    if (ack.type != MessageType::hello_ack) throw ProtocolError("expected HELLO_ACK");

    for (;;) {
      const WireMessage msg = read_message(stream);
      switch (msg.type) {
        case MessageType::round_start: {
          weights = deserialize_weights(msg.payload);
          if (optimizer.first_moment.empty()) optimizer = OptimizerState::for_weights(weights);
          TrainConfig local = cfg.train;
          local.shuffle_seed = round_shuffle_seed(cfg.train.shuffle_seed, msg.round, cfg.client_id);
          if (local.epochs > 0) {
            TrainResult trained = train(std::move(weights), std::move(optimizer), train_set.images, local);
            weights = std::move(trained.weights);
            optimizer = std::move(trained.state);
          }
          const Bytes upload = encode_upload(train_set.size(), weights);
          result.uploads.emplace_back(upload.begin() + 8, upload.end());
          write_message(stream, {MessageType::weights_upload, msg.round, cfg.client_id, upload});
          break;
        }
        case MessageType::global_update: {
          weights = deserialize_weights(msg.payload);
          result.final_matrix = evaluate(weights, test_set.images);
          result.final_accuracy = derive_metrics(result.final_matrix).accuracy;
          result.rounds = msg.round;
          write_message(stream, {MessageType::metrics_report, msg.round, cfg.client_id, encode_matrix(result.final_matrix)});
          break;
        }
        case MessageType::shutdown:
          return result;
        default:
          throw ProtocolError("unexpected " + std::string(to_string(msg.type)));
      }
    }
  } catch (const TransportError& e) {
    throw fail(e.what());
  } catch (const ProtocolError& e) {
    throw fail(e.what());
  } catch (const CorruptWeights& e) {
    throw fail(e.what());
  }
}

}  // namespace fedguard
