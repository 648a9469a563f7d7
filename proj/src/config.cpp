#include "fedguard/config.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "fedguard/errors.hpp"
#include "fedguard/io.hpp"

namespace fedguard {

ModelSpec ExperimentConfig::model_spec() const {
  ModelSpec spec = preset == "literal" ? ModelSpec::literal() : ModelSpec::desk();
  spec.height = raster.height;
  spec.width = raster.width;
  return spec;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(std::string_view v, std::size_t line) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size() || std::isnan(out))
    throw ConfigError(line, "malformed number '" + std::string(v) + "'");
  return out;
}

std::uint64_t to_uint(std::string_view v, std::size_t line, std::uint64_t max = std::numeric_limits<std::uint64_t>::max()) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw ConfigError(line, "malformed integer '" + std::string(v) + "'");
  if (out > max) throw ConfigError(line, "value " + std::string(v) + " out of range");
  return out;
}

void require(bool ok, std::size_t line, const std::string& what) {
  if (!ok) throw ConfigError(line, what);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::optional<std::uint32_t> rounds;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s(raw);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    require(eq != std::string_view::npos, line, "expected 'key = value'");
    const std::string key(trim(s.substr(0, eq)));
    const std::string_view value = trim(s.substr(eq + 1));
    require(!value.empty(), line, "missing value for '" + key + "'");

    if (key == "n") {
      cfg.simulation.n = to_uint(value, line, 0xffff);
      require(cfg.simulation.n >= 1, line, "n must be >= 1");
    } else if (key == "dictionary") {
      std::vector<double> levels;
      std::string_view rest = value;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        levels.push_back(to_double(trim(rest.substr(0, comma)), line));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
      }
      try {
        cfg.simulation.dictionary = EnergyDictionary(std::move(levels));
      } catch (const InvalidDictionary& e) {
        throw ConfigError(line, e.what());
      }
    } else if (key == "snr_db") {
      cfg.simulation.snr_db = to_double(value, line);
      require(cfg.simulation.snr_db != -std::numeric_limits<double>::infinity(), line, "snr_db out of range");
    } else if (key == "seed") {
      cfg.simulation.seed = to_uint(value, line);
    } else if (key == "grid") {
      cfg.raster.height = cfg.raster.width = to_uint(value, line, 0xffff);
      require(cfg.raster.height >= 2, line, "grid must be >= 2");
    } else if (key == "grid_height") {
      cfg.raster.height = to_uint(value, line, 0xffff);
      require(cfg.raster.height >= 2, line, "grid_height must be >= 2");
    } else if (key == "grid_width") {
      cfg.raster.width = to_uint(value, line, 0xffff);
      require(cfg.raster.width >= 2, line, "grid_width must be >= 2");
    } else if (key == "axis_range") {
      cfg.raster.axis_range = to_double(value, line);
      require(cfg.raster.axis_range > 0.0 && std::isfinite(cfg.raster.axis_range), line, "axis_range must be > 0");
    } else if (key == "preset") {
      require(value == "desk" || value == "literal", line, "preset must be 'desk' or 'literal'");
      cfg.preset = std::string(value);
    } else if (key == "init_seed") {
      cfg.init_seed = to_uint(value, line);
    } else if (key == "lr") {
      const double lr = to_double(value, line);
      require(lr > 0.0 && std::isfinite(lr), line, "lr must be > 0");
      cfg.train.learning_rate = cfg.federation.train.learning_rate = lr;
    } else if (key == "batch") {
      const auto b = to_uint(value, line);
      require(b >= 1, line, "batch must be >= 1");
      cfg.train.batch_size = cfg.federation.train.batch_size = b;
    } else if (key == "epochs") {
      cfg.train.epochs = to_uint(value, line);
    } else if (key == "local_epochs") {
      cfg.federation.train.epochs = to_uint(value, line);
    } else if (key == "beta1" || key == "beta2") {
      const double b = to_double(value, line);
      require(b >= 0.0 && b < 1.0, line, key + " must be in [0, 1)");
      (key == "beta1" ? cfg.train.beta1 : cfg.train.beta2) = b;
      (key == "beta1" ? cfg.federation.train.beta1 : cfg.federation.train.beta2) = b;
    } else if (key == "epsilon") {
      const double e = to_double(value, line);
      require(e > 0.0, line, "epsilon must be > 0");
      cfg.train.epsilon = cfg.federation.train.epsilon = e;
    } else if (key == "shuffle_seed") {
      cfg.train.shuffle_seed = cfg.federation.train.shuffle_seed = to_uint(value, line);
    } else if (key == "clients") {
      cfg.federation.clients = std::uint16_t(to_uint(value, line, 0xffff));
      require(cfg.federation.clients >= 1, line, "clients must be >= 1");
    } else if (key == "rounds") {
      rounds = std::uint32_t(to_uint(value, line, 0xffffffffu));
      require(*rounds >= 1, line, "rounds must be >= 1");
    } else if (key == "host") {
      cfg.federation.host = std::string(value);
    } else if (key == "port") {
      cfg.federation.port = std::uint16_t(to_uint(value, line, 0xffff));
    } else if (key == "handshake_timeout_s") {
      const double t = to_double(value, line);
      require(t > 0.0 && std::isfinite(t), line, "timeout must be > 0");
      cfg.federation.handshake_timeout = std::chrono::milliseconds(std::int64_t(t * 1000));
    } else if (key == "io_timeout_s") {
      const double t = to_double(value, line);
      require(t > 0.0 && std::isfinite(t), line, "timeout must be > 0");
      cfg.federation.io_timeout = std::chrono::milliseconds(std::int64_t(t * 1000));
    } else if (key == "throttle_bps") {
      cfg.federation.throttle.rate_bps = to_uint(value, line);
    } else if (key == "per_class") {
      cfg.per_class = to_uint(value, line);
      require(cfg.per_class >= 1, line, "per_class must be >= 1");
    } else if (key == "test_per_class") {
      cfg.test_per_class = to_uint(value, line);
      require(cfg.test_per_class >= 1, line, "test_per_class must be >= 1");
    } else if (key == "output_dir") {
      cfg.output_dir = std::string(value);
    } else {
      throw ConfigError(line, "unknown key '" + key + "'");
    }
  }
  cfg.federation.rounds = rounds.value_or(FederationConfig::default_rounds(cfg.federation.clients));
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  return parse_config(std::string(bytes.begin(), bytes.end()));
}

}  // namespace fedguard
