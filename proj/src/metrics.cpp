#include "fedguard/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "fedguard/errors.hpp"
#include "fedguard/io.hpp"

namespace fedguard {

void ConfusionMatrix::record(int truth, int predicted) {
  if (truth == 1)
    (predicted == 1 ? tp : fn) += 1;
  else
    (predicted == 1 ? fp : tn) += 1;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  tp += other.tp;
  tn += other.tn;
  fp += other.fp;
  fn += other.fn;
  return *this;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den, bool& undefined) {
  undefined = den == 0;
  return undefined ? 0.0 : double(num) / double(den);
}

}  // namespace

MetricsReport derive_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw InvalidInput("confusion matrix is empty");
  MetricsReport r;
  r.sensitivity = ratio(cm.tp, cm.tp + cm.fn, r.sensitivity_undefined);
  r.specificity = ratio(cm.tn, cm.tn + cm.fp, r.specificity_undefined);
  r.precision = ratio(cm.tp, cm.tp + cm.fp, r.precision_undefined);
  r.accuracy = double(cm.tp + cm.tn) / double(cm.total());
  const double denom = r.precision + r.sensitivity;
  r.f1_undefined = denom == 0.0;
  r.f1 = r.f1_undefined ? 0.0 : 2.0 * r.precision * r.sensitivity / denom;
  return r;
}

std::string format_report(const MetricsReport& r) {
  auto line = [](const char* name, double v, bool undefined) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-12s %.4f%s\n", name, v, undefined ? " (undefined)" : "");
    return std::string(buf);
  };
  return line("sensitivity", r.sensitivity, r.sensitivity_undefined) +
         line("specificity", r.specificity, r.specificity_undefined) +
         line("precision", r.precision, r.precision_undefined) + line("accuracy", r.accuracy, false) +
         line("f1", r.f1, r.f1_undefined);
}

HistoryRecord HistoryRecord::from_matrix(std::uint32_t round, std::uint16_t client_id, const ConfusionMatrix& cm) {
  const MetricsReport m = derive_metrics(cm);
  return {round, client_id, m.accuracy, m.sensitivity, m.specificity, m.precision, m.f1};
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw InvalidInput("history line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  return v;
}

}  // namespace

std::string format_history(std::span<const HistoryRecord> history) {
  std::vector<HistoryRecord> sorted(history.begin(), history.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const HistoryRecord& a, const HistoryRecord& b) {
    return a.round != b.round ? a.round < b.round : a.client_id < b.client_id;
  });
  std::string out = kHistoryHeader;
  out += '\n';
  for (const HistoryRecord& r : sorted) {
    out += std::to_string(r.round);
    out += ',';
    out += std::to_string(r.client_id);
    for (double v : {r.accuracy, r.sensitivity, r.specificity, r.precision, r.f1}) {
      out += ',';
      append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

std::vector<HistoryRecord> parse_history(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHistoryHeader) throw InvalidInput("history: missing or wrong header");
  std::vector<HistoryRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1))
      fields.push_back(rest.substr(0, pos));
    fields.push_back(rest);
    if (fields.size() != 7) throw InvalidInput("history line " + std::to_string(lineno) + ": expected 7 fields");
    HistoryRecord r;
    r.round = std::uint32_t(parse_double(fields[0], lineno));
    r.client_id = std::uint16_t(parse_double(fields[1], lineno));
    r.accuracy = parse_double(fields[2], lineno);
    r.sensitivity = parse_double(fields[3], lineno);
    r.specificity = parse_double(fields[4], lineno);
    r.precision = parse_double(fields[5], lineno);
    r.f1 = parse_double(fields[6], lineno);
    out.push_back(r);
  }
  return out;
}

std::size_t export_history(std::span<const HistoryRecord> history, const std::filesystem::path& path) {
  if (history.empty()) throw InvalidInput("history is empty");
  write_file_atomic(path, format_history(history));
  return history.size();
}

std::vector<HistoryRecord> load_history(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  return parse_history(std::string(bytes.begin(), bytes.end()));
}

}  // namespace fedguard
