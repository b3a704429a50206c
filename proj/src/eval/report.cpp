#include "smoothsinger/eval/report.hpp"

#include <cmath>
#include "json.hpp"

#include "smoothsinger/errors.hpp"
#include "smoothsinger/text.hpp"

namespace smoothsinger::eval {

MetricSummary summarize(const std::string& metric, std::vector<std::string> utterances, std::vector<double> values) {
  if (values.empty()) throw ValidationError("metric " + metric + ": no values");
  if (utterances.size() != values.size()) throw ValidationError("metric " + metric + ": ids and values differ in count");
  MetricSummary s;
  s.metric = metric;
  const auto n = static_cast<double>(values.size());
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  if (values.size() >= 2) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double half = 1.96 * std::sqrt(ss / (n - 1)) / std::sqrt(n);
    s.ci_low = s.mean - half;
    s.ci_high = s.mean + half;
  }
  s.utterances = std::move(utterances);
  s.values = std::move(values);
  return s;
}

std::string format_tsv(const std::vector<MetricReport>& reports) {
  std::string out = "section\tmetric\tn\tmean\tci95_low\tci95_high\n";
  for (const auto& r : reports)
    for (const auto& m : r.metrics)
      out += r.section + "\t" + m.metric + "\t" + std::to_string(m.values.size()) + "\t" + real_text(m.mean) + "\t" +
             (m.ci_low ? real_text(*m.ci_low) : "-") + "\t" + (m.ci_high ? real_text(*m.ci_high) : "-") + "\n";
  out += "\nsection\tutterance\tmetric\tvalue\n";
  for (const auto& r : reports)
    for (const auto& m : r.metrics)
      for (std::size_t i = 0; i < m.values.size(); ++i)
        out += r.section + "\t" + m.utterances[i] + "\t" + m.metric + "\t" + real_text(m.values[i]) + "\n";
  return out;
}

namespace {

// JSON has no infinities; they are written as strings.
nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

}  // namespace

std::string format_json(const std::vector<MetricReport>& reports) {
  nlohmann::json root;
  root["schema_version"] = 1;
  root["sections"] = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json sec;
    sec["name"] = r.section;
    sec["info"] = r.info;
    sec["metrics"] = nlohmann::json::array();
    for (const auto& m : r.metrics) {
      nlohmann::json j;
      j["name"] = m.metric;
      j["n"] = m.values.size();
      j["mean"] = number(m.mean);
      j["ci95"] = m.ci_low ? nlohmann::json::array({number(*m.ci_low), number(*m.ci_high)}) : nlohmann::json();
      j["values"] = nlohmann::json::array();
      for (std::size_t i = 0; i < m.values.size(); ++i)
        j["values"].push_back({{"utterance", m.utterances[i]}, {"value", number(m.values[i])}});
      sec["metrics"].push_back(j);
    }
    root["sections"].push_back(sec);
  }
  return root.dump(2) + "\n";
}

}  // namespace smoothsinger::eval
