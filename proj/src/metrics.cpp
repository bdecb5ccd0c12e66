#include "gradbal/metrics.hpp"

#include <string>

#include "gradbal/errors.hpp"

namespace gradbal {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < classes; ++k) n += at(k, k);
  return n;
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred,
                          std::size_t classes) {
  if (y_true.size() != y_pred.size()) throw ConfigError("confusion: label vectors differ in length");
  if (y_true.empty()) throw ConfigError("confusion: no samples");
  ConfusionMatrix m{classes, std::vector<std::size_t>(classes * classes, 0)};
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= classes ||
        static_cast<std::size_t>(p) >= classes)
      throw LabelError("confusion: label outside [0, " + std::to_string(classes) + ") at " +
                       std::to_string(i));
    ++m.counts[static_cast<std::size_t>(t) * classes + static_cast<std::size_t>(p)];
  }
  return m;
}

double fbeta_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, double beta) {
  const double b2 = beta * beta;
  const double num = (1.0 + b2) * static_cast<double>(tp);
  const double den = num + b2 * static_cast<double>(fn) + static_cast<double>(fp);
  return den == 0.0 ? 0.0 : num / den;
}

std::vector<ClassScores> per_class_prf(const ConfusionMatrix& m) {
  std::vector<ClassScores> out(m.classes);
  for (std::size_t c = 0; c < m.classes; ++c) {
    std::size_t predicted = 0, support = 0;
    for (std::size_t k = 0; k < m.classes; ++k) {
      predicted += m.at(k, c);
      support += m.at(c, k);
    }
    const std::size_t tp = m.at(c, c);
    out[c].precision = ratio(tp, predicted);
    out[c].recall = ratio(tp, support);
    out[c].f1 = fbeta_from_counts(tp, predicted - tp, support - tp, 1.0);
    out[c].f2 = fbeta_from_counts(tp, predicted - tp, support - tp, 2.0);
    out[c].support = support;
  }
  return out;
}

std::array<double, 15> MetricsReport::values() const {
  return {weighted.precision, weighted.recall, weighted.f1, weighted.f2, weighted.accuracy,
          macro.precision,    macro.recall,    macro.f1,    macro.f2,    macro.accuracy,
          micro.precision,    micro.recall,    micro.f1,    micro.f2,    micro.accuracy};
}

MetricsReport MetricsReport::from_values(const std::array<double, 15>& v) {
  MetricsReport r;
  r.weighted = {v[0], v[1], v[2], v[3], v[4]};
  r.macro = {v[5], v[6], v[7], v[8], v[9]};
  r.micro = {v[10], v[11], v[12], v[13], v[14]};
  r.mean_of_15 = gradbal::mean_of_15(v);
  return r;
}

double mean_of_15(const std::array<double, 15>& values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s / 15.0;
}

MetricsReport report(const ConfusionMatrix& m) {
  const auto scores = per_class_prf(m);
  const std::size_t total = m.total();
  const std::size_t trace = m.trace();
  const double n = static_cast<double>(total);
  const double k = static_cast<double>(m.classes);

  MetricsReport r;
  for (const auto& s : scores) {
    const double w = static_cast<double>(s.support) / n;
    r.weighted.precision += w * s.precision;
    r.weighted.f1 += w * s.f1;
    r.weighted.f2 += w * s.f2;
    r.macro.precision += s.precision / k;
    r.macro.recall += s.recall / k;
    r.macro.f1 += s.f1 / k;
    r.macro.f2 += s.f2 / k;
  }
  // Support-weighted recall telescopes to trace / total.
  r.weighted.recall = ratio(trace, total);
  r.weighted.accuracy = r.weighted.recall;
  r.macro.accuracy = r.macro.recall;

  // Pooled counts: every error is one FP and one FN, so FP = FN.
  const std::size_t errors = total - trace;
  r.micro.precision = ratio(trace, total);
  r.micro.recall = ratio(trace, total);
  r.micro.f1 = fbeta_from_counts(trace, errors, errors, 1.0);
  r.micro.f2 = fbeta_from_counts(trace, errors, errors, 2.0);
  r.micro.accuracy = ratio(trace, total);
  r.mean_of_15 = mean_of_15(r.values());
  return r;
}

MetricsReport report(std::span<const int> y_true, std::span<const int> y_pred, std::size_t classes) {
  return report(confusion(y_true, y_pred, classes));
}

}  // namespace gradbal
