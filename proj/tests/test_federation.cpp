#include <doctest.h>

#include <algorithm>
#include <mutex>
#include <thread>

#include "fedguard/errors.hpp"
#include "fedguard/federation.hpp"

using namespace fedguard;
using namespace std::chrono_literals;

namespace {

ModelWeights vec(std::vector<double> v) {
  ModelWeights w;
  w.tensors.push_back({{std::uint32_t(v.size())}, std::move(v)});
  return w;
}

ModelWeights random_like(const ModelWeights& shape, Rng& rng) {
  ModelWeights w = shape;
  for (Tensor& t : w.tensors)
    for (double& v : t.values) v = 2.0 * rng.uniform() - 1.0;
  return w;
}

double max_abs_diff(const ModelWeights& a, const ModelWeights& b) {
  double d = 0.0;
  for (std::size_t t = 0; t < a.tensors.size(); ++t)
    for (std::size_t i = 0; i < a.tensors[t].size(); ++i)
      d = std::max(d, std::abs(a.tensors[t].values[i] - b.tensors[t].values[i]));
  return d;
}

struct Shard {
  LabeledDataset train;
  LabeledDataset test;
};

Shard shard(std::uint64_t seed, std::size_t per_class = 6) {
  const RasterConfig ras{8, 8, 3.0};
  return {generate_dataset(SimulationConfig{}, ras, per_class, seed),
          generate_dataset(SimulationConfig{}, ras, 4, seed + 1000)};
}

ModelSpec small_spec() { return ModelSpec{8, 8, {2, 3}}; }

FederationConfig fed_config(std::uint16_t clients, std::uint32_t rounds) {
  FederationConfig cfg;
  cfg.clients = clients;
  cfg.rounds = rounds;
  cfg.handshake_timeout = 20s;
  cfg.io_timeout = 20s;
  return cfg;
}

ClientConfig client_config(std::uint16_t id, TrainConfig train = {}) {
  ClientConfig c;
  c.client_id = id;
  c.train = train;
  c.retry_delay = 20ms;
  c.io_timeout = 20s;
  return c;
}

struct RunOutcome {
  CoordinatorResult server;
  std::vector<ClientResult> clients;
  std::vector<CoordinatorEvent> events;
};

RunOutcome federate(std::uint16_t clients, std::uint32_t rounds, const TrainConfig& train, const ModelWeights& initial) {
  Coordinator coordinator(fed_config(clients, rounds));
  RunOutcome out;
  std::mutex mu;
  coordinator.set_observer([&](const CoordinatorEvent& e) {
    std::lock_guard lock(mu);
    out.events.push_back(e);
  });
  out.clients.resize(clients);
  std::vector<std::thread> threads;
  for (std::uint16_t id = 1; id <= clients; ++id)
    threads.emplace_back([&, id] {
      const Shard s = shard(id);
      out.clients[id - 1] = run_client(client_config(id, train), s.train, s.test, "127.0.0.1", coordinator.port());
    });
  out.server = coordinator.run(initial);
  for (auto& t : threads) t.join();
  return out;
}

}  // namespace

TEST_CASE("fedavg examples") {
  const ClientUpdate mean[] = {{5, vec({0, 2})}, {5, vec({2, 4})}};
  CHECK(max_abs_diff(fedavg(mean), vec({1, 3})) < 1e-6);
  const ClientUpdate weighted[] = {{1, vec({0})}, {3, vec({4})}};
  CHECK(std::abs(fedavg(weighted).tensors[0].values[0] - 3.0) < 1e-6);
  const ClientUpdate one[] = {{7, vec({0.1, -0.3})}};
  CHECK(fedavg(one) == vec({0.1, -0.3}));
}

TEST_CASE("fedavg properties") {
  const ModelWeights shape = build_model(small_spec(), 1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t k = 1 + rng.uniform_index(5);
    std::vector<ClientUpdate> ups;
    for (std::size_t i = 0; i < k; ++i) ups.push_back({1 + rng.uniform_index(1000), random_like(shape, rng)});

    // identical inputs come back exactly, whatever the counts
    std::vector<ClientUpdate> same = ups;
    for (auto& u : same) u.weights = ups[0].weights;
    CHECK(fedavg(same) == ups[0].weights);

    const ModelWeights avg = fedavg(ups);
    std::vector<ClientUpdate> perm = ups;
    std::reverse(perm.begin(), perm.end());
    std::rotate(perm.begin(), perm.begin() + std::ptrdiff_t(rng.uniform_index(k)), perm.end());
    CHECK(max_abs_diff(fedavg(perm), avg) < 1e-12);

    const double alpha = -3.0 + 6.0 * rng.uniform();
    std::vector<ClientUpdate> scaled = ups;
    for (auto& u : scaled)
      for (auto& t : u.weights.tensors)
        for (double& v : t.values) v *= alpha;
    ModelWeights expect = avg;
    for (auto& t : expect.tensors)
      for (double& v : t.values) v *= alpha;
    CHECK(max_abs_diff(fedavg(scaled), expect) < 1e-6);

    // coordinate-wise weighted mean
    double total = 0;
    for (const auto& u : ups) total += double(u.sample_count);
    double direct = 0;
    for (const auto& u : ups) direct += double(u.sample_count) / total * u.weights.tensors[2].values[3];
    CHECK(avg.tensors[2].values[3] == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("fedavg errors") {
  CHECK_THROWS_AS(fedavg({}), InvalidInput);
  const ClientUpdate zero[] = {{0, vec({1})}};
  CHECK_THROWS_AS(fedavg(zero), InvalidInput);
  const ClientUpdate mismatch[] = {{1, vec({1})}, {1, vec({1, 2})}};
  CHECK_THROWS_AS(fedavg(mismatch), AggregationError);
  const ClientUpdate count[] = {{1, build_model(small_spec(), 1)}, {1, build_model(ModelSpec{8, 8, {2}}, 1)}};
  CHECK_THROWS_AS(fedavg(count), AggregationError);
}

TEST_CASE("round state enforces full participation") {
  RoundState st(4, {1, 2, 3});
  CHECK(st.phase() == RoundPhase::collecting);
  st.add_upload(2, {10, vec({1})});
  CHECK_THROWS_AS(st.aggregate(), AggregationError);
  CHECK_THROWS_AS(st.add_upload(2, {10, vec({1})}), ProtocolError);
  CHECK_THROWS_AS(st.add_upload(9, {10, vec({1})}), ProtocolError);
  st.add_upload(1, {10, vec({4})});
  CHECK_FALSE(st.complete());
  CHECK_THROWS_AS(st.aggregate(), AggregationError);
  CHECK_THROWS_AS(st.mark_distributed(), ProtocolError);
  st.add_upload(3, {20, vec({3})});
  CHECK(st.complete());
  CHECK(std::abs(st.aggregate().tensors[0].values[0] - 2.75) < 1e-12);
  CHECK(st.phase() == RoundPhase::aggregating);
  CHECK_THROWS_AS(st.add_upload(1, {1, vec({1})}), ProtocolError);
  CHECK_THROWS_AS(st.mark_done(), ProtocolError);
  st.mark_distributed();
  st.mark_done();
  CHECK(st.phase() == RoundPhase::done);
  CHECK_THROWS_AS(RoundState(1, {}), InvalidInput);
}

TEST_CASE("federation config") {
  CHECK(FederationConfig::default_rounds(2) == 10);
  CHECK(FederationConfig::default_rounds(4) == 15);
  FederationConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.rounds = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = {};
  cfg.clients = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

TEST_CASE("payload codecs") {
  const ModelWeights w = build_model(small_spec(), 5);
  const Bytes up = encode_upload(1234, w);
  const ClientUpdate back = decode_upload(up);
  CHECK(back.sample_count == 1234);
  CHECK(back.weights == w);
  CHECK(Bytes(up.begin() + 8, up.end()) == serialize_weights(w));
  CHECK_THROWS_AS(decode_upload(std::span(up).first(5)), ProtocolError);

  const ConfusionMatrix cm{1, 2, 3, 4};
  CHECK(decode_matrix(encode_matrix(cm)) == cm);
  CHECK_THROWS_AS(decode_matrix(Bytes(31)), ProtocolError);
  CHECK(round_shuffle_seed(1, 2, 3) != round_shuffle_seed(1, 3, 2));
}

TEST_CASE("one client, one round returns the client's model") {
  TrainConfig train;
  train.batch_size = 4;
  const ModelWeights init = build_model(small_spec(), 3);
  const RunOutcome r = federate(1, 1, train, init);
  REQUIRE(r.clients[0].uploads.size() == 1);
  CHECK(r.server.global == deserialize_weights(r.clients[0].uploads[0]));
  CHECK(r.server.global != init);
  CHECK(r.server.history.size() == 1);
  CHECK(r.clients[0].rounds == 1);
}

TEST_CASE("zero learning rate keeps the initial model") {
  TrainConfig train;
  train.learning_rate = 0.0;
  const ModelWeights init = build_model(small_spec(), 4);
  const RunOutcome r = federate(2, 3, train, init);
  CHECK(r.server.global == init);
  CHECK(r.server.round_globals.size() == 3);
  CHECK(r.server.history.size() == 6);
}

TEST_CASE("zero local epochs upload the received weights") {
  TrainConfig train;
  train.epochs = 0;
  const ModelWeights init = build_model(small_spec(), 4);
  const RunOutcome r = federate(2, 2, train, init);
  for (const ClientResult& c : r.clients)
    for (const Bytes& up : c.uploads) CHECK(up == serialize_weights(init));
}

TEST_CASE("uploads are serviced in client order behind a barrier") {
  TrainConfig train;
  train.batch_size = 4;
  const RunOutcome r = federate(3, 2, train, build_model(small_spec(), 6));
  std::vector<CoordinatorEvent> seq;
  for (const auto& e : r.events)
    if (e.kind == CoordinatorEvent::Kind::upload_serviced || e.kind == CoordinatorEvent::Kind::aggregated)
      seq.push_back(e);
  REQUIRE(seq.size() == 8);
  for (std::size_t round = 0; round < 2; ++round) {
    for (std::uint16_t k = 0; k < 3; ++k) {
      CHECK(seq[round * 4 + k].kind == CoordinatorEvent::Kind::upload_serviced);
      CHECK(seq[round * 4 + k].client_id == k + 1);
    }
    CHECK(seq[round * 4 + 3].kind == CoordinatorEvent::Kind::aggregated);
    CHECK(seq[round * 4 + 3].uploads_received == 3);
  }
  // history covers every client every round, sorted by the exporter
  CHECK(r.server.history.size() == 6);
}

TEST_CASE("a delayed client holds back aggregation") {
  Coordinator coordinator(fed_config(2, 1));
  std::vector<CoordinatorEvent> events;
  std::mutex mu;
  auto stamp = [] { return std::chrono::steady_clock::now(); };
  std::chrono::steady_clock::time_point late_upload{}, aggregated{};
  coordinator.set_observer([&](const CoordinatorEvent& e) {
    std::lock_guard lock(mu);
    if (e.kind == CoordinatorEvent::Kind::aggregated) aggregated = stamp();
    events.push_back(e);
  });
  const ModelWeights init = build_model(small_spec(), 2);
  std::thread fast([&] {
    const Shard s = shard(1);
    run_client(client_config(1), s.train, s.test, "127.0.0.1", coordinator.port());
  });
  std::thread slow([&] {
    auto sock = TcpStream::connect("127.0.0.1", coordinator.port());
    write_message(*sock, {MessageType::hello, 0, 2, {}});
    read_message(*sock);
    const WireMessage start = read_message(*sock);
    std::this_thread::sleep_for(300ms);
    late_upload = stamp();
    write_message(*sock, {MessageType::weights_upload, start.round, 2, encode_upload(5, init)});
    read_message(*sock);
    write_message(*sock, {MessageType::metrics_report, start.round, 2, encode_matrix({1, 1, 0, 0})});
    read_message(*sock);
  });
  const CoordinatorResult res = coordinator.run(init);
  fast.join();
  slow.join();
  CHECK(aggregated > late_upload);
  CHECK(res.history.size() == 2);
}

TEST_CASE("identical seeds reproduce the whole run") {
  TrainConfig train;
  train.batch_size = 4;
  train.shuffle_seed = 77;
  const ModelWeights init = build_model(small_spec(), 8);
  const RunOutcome a = federate(2, 3, train, init);
  const RunOutcome b = federate(2, 3, train, init);
  CHECK(serialize_weights(a.server.global) == serialize_weights(b.server.global));
  CHECK(format_history(a.server.history) == format_history(b.server.history));
  for (std::size_t k = 0; k < 2; ++k) CHECK(a.clients[k].uploads == b.clients[k].uploads);
  // different clients train on different shuffles and data
  CHECK(a.clients[0].uploads[0] != a.clients[1].uploads[0]);
}

TEST_CASE("a dropped client aborts the round with its id") {
  Coordinator coordinator(fed_config(1, 2));
  std::thread quitter([&] {
    auto sock = TcpStream::connect("127.0.0.1", coordinator.port());
    write_message(*sock, {MessageType::hello, 0, 7, {}});
    read_message(*sock);
    read_message(*sock);  // ROUND_START, then hang up
  });
  std::vector<CoordinatorEvent> events;
  coordinator.set_observer([&](const CoordinatorEvent& e) { events.push_back(e); });
  CHECK_THROWS_WITH_AS(coordinator.run(build_model(small_spec(), 1)), doctest::Contains("round 1, client 7"),
                       TransportError);
  quitter.join();
  for (const auto& e : events) CHECK(e.kind != CoordinatorEvent::Kind::aggregated);
}

TEST_CASE("a silent client times out") {
  FederationConfig cfg = fed_config(1, 1);
  cfg.io_timeout = 200ms;
  Coordinator coordinator(cfg);
  std::unique_ptr<TcpStream> sock;
  std::thread idle([&] {
    sock = TcpStream::connect("127.0.0.1", coordinator.port());
    write_message(*sock, {MessageType::hello, 0, 3, {}});
  });
  CHECK_THROWS_WITH_AS(coordinator.run(build_model(small_spec(), 1)), doctest::Contains("round 1, client 3"),
                       TimeoutError);
  idle.join();
}

TEST_CASE("handshake timeout and duplicate ids") {
  FederationConfig cfg = fed_config(2, 1);
  cfg.handshake_timeout = 200ms;
  CHECK_THROWS_AS(Coordinator(cfg).run(build_model(small_spec(), 1)), TimeoutError);

  Coordinator dup(fed_config(2, 1));
  std::vector<std::unique_ptr<TcpStream>> socks(2);
  std::thread twins([&] {
    for (auto& s : socks) {
      s = TcpStream::connect("127.0.0.1", dup.port());
      write_message(*s, {MessageType::hello, 0, 5, {}});
    }
  });
  CHECK_THROWS_AS(dup.run(build_model(small_spec(), 1)), ProtocolError);
  twins.join();
}

TEST_CASE("unreachable server exhausts retries") {
  std::uint16_t port = 0;
  {
    TcpListener gone("127.0.0.1", 0);
    port = gone.port();
  }
  ClientConfig cfg = client_config(1);
  cfg.connect_retries = 3;
  cfg.retry_delay = 10ms;
  const Shard s = shard(1);
  CHECK_THROWS_AS(run_client(cfg, s.train, s.test, "127.0.0.1", port), TransportError);
  CHECK_THROWS_AS(run_client(cfg, LabeledDataset{}, s.test, "127.0.0.1", port), InvalidInput);
}

TEST_CASE("client surfaces a lost server") {
  TcpListener listener("127.0.0.1", 0);
  std::thread server([&] {
    auto conn = listener.accept(5s);
    read_message(*conn);
    write_message(*conn, {MessageType::hello_ack, 0, 1, Bytes{1, 0, 0, 0}});
  });
  const Shard s = shard(1);
  CHECK_THROWS_WITH_AS(run_client(client_config(1), s.train, s.test, "127.0.0.1", listener.port()),
                       doctest::Contains("client 1"), TransportError);
  server.join();
}
