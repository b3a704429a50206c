#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace smoothsinger::eval {

struct MetricSummary {
  std::string metric;
  std::vector<std::string> utterances;
  std::vector<double> values;
  double mean = 0.0;
  // mean -+ 1.96 * stderr, present only when n >= 2.
  std::optional<double> ci_low, ci_high;
};

MetricSummary summarize(const std::string& metric, std::vector<std::string> utterances, std::vector<double> values);

struct MetricReport {
  std::string section;
  std::map<std::string, std::string> info;
  std::vector<MetricSummary> metrics;
};

// Aggregate table (section, metric, n, mean, ci95_low, ci95_high), a blank
// line, then per-utterance rows (section, utterance, metric, value).
std::string format_tsv(const std::vector<MetricReport>& reports);

// {"schema_version": 1, "sections": [{"name", "info", "metrics": [{"name",
// "n", "mean", "ci95": [low, high] | null, "values": [{"utterance", "value"}]}]}]}
std::string format_json(const std::vector<MetricReport>& reports);

}  // namespace smoothsinger::eval
