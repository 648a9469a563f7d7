#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fedguard {

/// Binary confusion counts; the positive class is the adversary.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  void record(int truth, int predicted);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Ratios with 0/0 reported as 0 and flagged.
struct MetricsReport {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  bool sensitivity_undefined = false;
  bool specificity_undefined = false;
  bool precision_undefined = false;
  bool f1_undefined = false;
};

/// Throws InvalidInput on an empty matrix.
MetricsReport derive_metrics(const ConfusionMatrix& cm);

std::string format_report(const MetricsReport& report);

/// One evaluation of one client after one federation round.
struct HistoryRecord {
  std::uint32_t round = 0;
  std::uint16_t client_id = 0;
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  double f1 = 0.0;

  static HistoryRecord from_matrix(std::uint32_t round, std::uint16_t client_id, const ConfusionMatrix& cm);
  bool operator==(const HistoryRecord&) const = default;
};

inline constexpr const char* kHistoryHeader = "round,client_id,accuracy,sensitivity,specificity,precision,f1";

/// CSV text sorted by (round, client_id); values printed with round-trip precision.
std::string format_history(std::span<const HistoryRecord> history);
std::vector<HistoryRecord> parse_history(const std::string& text);

/// Writes the CSV atomically; returns the number of data rows.
std::size_t export_history(std::span<const HistoryRecord> history, const std::filesystem::path& path);
std::vector<HistoryRecord> load_history(const std::filesystem::path& path);

}  // namespace fedguard
