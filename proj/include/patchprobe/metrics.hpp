#pragma once

// Precision, recall and F1 with "vulnerable" as the positive class.

#include <cstddef>
#include <optional>

#include "json.hpp"

namespace patchprobe {

struct MetricsReport {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::optional<double> precision, recall, f1;
};

/// Undefined ratios (zero denominators) stay empty rather than becoming 0.
inline MetricsReport compute_metrics(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    MetricsReport m{tp, fp, fn, tn, std::nullopt, std::nullopt, std::nullopt};
    if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (m.precision && m.recall && *m.precision + *m.recall > 0)
        m.f1 = 2 * *m.precision * *m.recall / (*m.precision + *m.recall);
    return m;
}

/// Counts one (predicted, actual) outcome.
inline void tally(MetricsReport& m, bool predicted_vulnerable, bool actually_vulnerable) {
    if (predicted_vulnerable && actually_vulnerable) ++m.tp;
    else if (predicted_vulnerable) ++m.fp;
    else if (actually_vulnerable) ++m.fn;
    else ++m.tn;
}

inline MetricsReport finalize(const MetricsReport& counts) { return compute_metrics(counts.tp, counts.fp, counts.fn, counts.tn); }

inline nlohmann::json to_json(const MetricsReport& m) {
    auto ratio = [](const std::optional<double>& r) { return r ? nlohmann::json(*r) : nlohmann::json(nullptr); };
    return {{"tp", m.tp},
            {"fp", m.fp},
            {"fn", m.fn},
            {"tn", m.tn},
            {"precision", ratio(m.precision)},
            {"recall", ratio(m.recall)},
            {"f1", ratio(m.f1)}};
}

} // namespace patchprobe
