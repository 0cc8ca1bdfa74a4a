#pragma once

#include <nfcjam/pipeline.hpp>

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace nfcjam {

nlohmann::ordered_json metrics_to_json(const SessionMetrics &metrics);

/// One CSV row under the sweep header, with `param` as the first column.
std::string metrics_to_csv(const SessionMetrics &metrics, double param = 0.0);

std::string sweep_to_csv(const std::vector<SweepRow> &rows);

nlohmann::ordered_json recovered_to_json(const RecoveredTranscript &recovered);
RecoveredTranscript recovered_from_json(const nlohmann::json &json);

nlohmann::ordered_json annotations_to_json(const std::vector<Annotation> &annotations);
std::vector<Annotation> annotations_from_json(const nlohmann::json &json);

}
