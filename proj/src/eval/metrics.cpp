#include "maple/eval/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "maple/util/text.hpp"

namespace maple::eval {

double percent(long long num, long long den) {
  if (den == 0) return 0.0;
  const double raw = 100.0 * static_cast<double>(num) / static_cast<double>(den);
  return std::round(raw * 100.0) / 100.0;
}

std::string format_percent(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

Fraction score_rubrics(const std::vector<device::ActionToken>& executed,
                       const sim::World& world, const std::vector<Rubric>& rubrics) {
  Fraction f;
  f.den = static_cast<long long>(rubrics.size());
  for (std::size_t i = 0; i < rubrics.size(); ++i) {
    if (rubrics[i].predicate.empty()) throw MissingPredicateError(i);
    if (sim::eval_predicate(world, rubrics[i].predicate, executed)) ++f.num;
  }
  return f;
}

namespace {

bool tokens_equal(const device::ActionToken& a, const device::ActionToken& b) {
  return a.kind == b.kind &&
         util::canonical_key(a.target) == util::canonical_key(b.target);
}

}  // namespace

Fraction action_accuracy(const std::vector<device::ActionToken>& executed,
                         const std::vector<device::ActionToken>& reference) {
  if (reference.empty()) throw EmptyReferenceError();
  const std::size_t n = executed.size();
  const std::size_t m = reference.size();
  std::vector<std::vector<long long>> dp(n + 1, std::vector<long long>(m + 1, 0));
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      if (tokens_equal(executed[i - 1], reference[j - 1])) {
        dp[i][j] = dp[i - 1][j - 1] + 1;
      } else {
        dp[i][j] = std::max(dp[i - 1][j], dp[i][j - 1]);
      }
    }
  }
  return Fraction{dp[n][m], static_cast<long long>(m)};
}

MetricsReport compute_metrics(const std::vector<TaskResult>& results) {
  MetricsReport report;
  report.tasks = results;
  long long tasks = static_cast<long long>(results.size());
  long long successes = 0, terminated = 0;
  Fraction ss, aa, rs;
  for (const auto& r : results) {
    if (r.status == "success") ++successes;
    if (r.status == "terminated") ++terminated;
    ss.num += r.satisfaction.num;
    ss.den += r.satisfaction.den;
    aa.num += r.accuracy.num;
    aa.den += r.accuracy.den;
    rs.num += r.recovered;
    rs.den += r.recovery_episodes;
  }
  const auto metric = [](long long num, long long den) -> std::optional<MetricValue> {
    if (den == 0) return std::nullopt;
    return MetricValue{num, den, percent(num, den)};
  };
  report.sr = metric(successes, tasks);
  report.tr = metric(terminated, tasks);
  report.ss = metric(ss.num, ss.den);
  report.aa = metric(aa.num, aa.den);
  report.rs = metric(rs.num, rs.den);
  return report;
}

namespace {

void emit_metric(std::ostringstream& out, const char* label,
                 const std::optional<MetricValue>& m) {
  out << "  " << label << ": ";
  if (m) {
    out << format_percent(m->pct) << " (" << m->num << "/" << m->den << ")";
  } else {
    out << "n/a";
  }
  out << "\n";
}

nlohmann::json metric_json(const std::optional<MetricValue>& m) {
  if (!m) return nullptr;
  return nlohmann::json{{"num", m->num}, {"den", m->den}, {"percent", m->pct}};
}

}  // namespace

std::string report_to_text(const MetricsReport& report) {
  std::ostringstream out;
  out << "tasks: " << report.tasks.size() << "\n";
  for (const auto& t : report.tasks) {
    out << "  " << t.task_id << ": " << t.status;
    if (t.satisfaction.den > 0) {
      out << "  SS " << t.satisfaction.num << "/" << t.satisfaction.den;
    }
    if (t.accuracy.den > 0) {
      out << "  AA " << t.accuracy.num << "/" << t.accuracy.den;
    }
    if (t.recovery_episodes > 0) {
      out << "  RS " << t.recovered << "/" << t.recovery_episodes;
    }
    out << "\n";
  }
  out << "aggregate:\n";
  emit_metric(out, "SS", report.ss);
  emit_metric(out, "AA", report.aa);
  emit_metric(out, "TR", report.tr);
  emit_metric(out, "SR", report.sr);
  emit_metric(out, "RS", report.rs);
  return out.str();
}

std::string report_to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "task_id,status,ss_num,ss_den,aa_num,aa_den,recovered,episodes\n";
  for (const auto& t : report.tasks) {
    out << t.task_id << "," << t.status << "," << t.satisfaction.num << ","
        << t.satisfaction.den << "," << t.accuracy.num << "," << t.accuracy.den << ","
        << t.recovered << "," << t.recovery_episodes << "\n";
  }
  return out.str();
}

nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : report.tasks) {
    tasks.push_back({{"task_id", t.task_id},
                     {"status", t.status},
                     {"ss", {{"num", t.satisfaction.num}, {"den", t.satisfaction.den}}},
                     {"aa", {{"num", t.accuracy.num}, {"den", t.accuracy.den}}},
                     {"recovered", t.recovered},
                     {"episodes", t.recovery_episodes}});
  }
  return nlohmann::json{{"tasks", std::move(tasks)},
                        {"SS", metric_json(report.ss)},
                        {"AA", metric_json(report.aa)},
                        {"TR", metric_json(report.tr)},
                        {"SR", metric_json(report.sr)},
                        {"RS", metric_json(report.rs)}};
}

}  // namespace maple::eval
