#pragma once

#include "fcnet/nested_cv.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace fcnet::eval {

nlohmann::json to_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

/// FNV-1a of the canonical (compact) JSON form of the report.
std::string report_digest(const EvalReport& report);

void write_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);

/// Long-format ROC table: curve,threshold,fpr,tpr. Curves are one per fold
/// plus "pooled_class0", "pooled_class1" and "pooled_micro".
void write_roc_csv(const EvalReport& report, const std::filesystem::path& path);

/// ROC plot of the pooled out-of-fold predictions: one curve per class,
/// the micro-average, and the macro-average (mean TPR over a shared FPR grid).
std::string roc_svg(const EvalReport& report, const std::string& title);
void write_roc_svg(const EvalReport& report, const std::string& title,
                   const std::filesystem::path& path);

/// Plain-text table of per-fold metrics and aggregates.
std::string format_report(const EvalReport& report);

}  // namespace fcnet::eval
