#include "fcnet/report.hpp"

#include "fcnet/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace fcnet::eval {

using nlohmann::json;

json to_json(const HyperParams& hp) {
  return {{"dropout_a", hp.dropout_a},
          {"dropout_b", hp.dropout_b},
          {"dropout_c", hp.dropout_c},
          {"dense_units", hp.dense_units},
          {"activation", to_string(hp.activation)},
          {"learning_rate", hp.learning_rate}};
}

HyperParams hyperparams_from_json(const json& j) {
  HyperParams hp;
  hp.dropout_a = j.value("dropout_a", hp.dropout_a);
  hp.dropout_b = j.value("dropout_b", hp.dropout_b);
  hp.dropout_c = j.value("dropout_c", hp.dropout_c);
  hp.dense_units = j.value("dense_units", hp.dense_units);
  hp.activation = activation_from_string(j.value("activation", to_string(hp.activation)));
  hp.learning_rate = j.value("learning_rate", hp.learning_rate);
  return hp;
}

namespace {

json summary_json(const Summary& s) { return {{"mean", s.mean}, {"std", s.std}}; }

json trial_json(const tuner::Trial& t) {
  json j{{"trial_id", t.id},
         {"hp", to_json(t.hp)},
         {"resource", t.resource},
         {"seed", t.seed},
         {"score", t.failed() ? json(nullptr) : json(t.score)}};
  if (t.bracket >= 0) {
    j["bracket"] = t.bracket;
    j["rung"] = t.rung;
  }
  if (t.failed()) j["error"] = t.error;
  return j;
}

tuner::Trial trial_from_json(const json& j) {
  tuner::Trial t;
  t.id = j.at("trial_id");
  t.hp = hyperparams_from_json(j.at("hp"));
  t.resource = j.at("resource");
  t.seed = j.at("seed");
  if (j.at("score").is_null()) {
    t.score = -std::numeric_limits<double>::infinity();
    t.error = j.value("error", "failed");
  } else {
    t.score = j.at("score");
  }
  t.bracket = j.value("bracket", -1);
  t.rung = j.value("rung", -1);
  return t;
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

}  // namespace

json to_json(const EvalReport& report) {
  json doc;
  doc["schema"] = "fcnet-eval-report";
  doc["schema_version"] = report.schema_version;
  doc["config_hash"] = report.config_hash;
  doc["seed"] = report.seed;
  doc["folds"] = json::array();
  for (const auto& f : report.folds) {
    json fj;
    fj["fold"] = f.fold;
    fj["seed"] = f.seed;
    fj["test_subjects"] = f.test_subjects;
    fj["tuning_subjects"] = f.tuning_subjects;
    fj["confusion"] = {{"tp", f.confusion.tp},
                       {"fp", f.confusion.fp},
                       {"tn", f.confusion.tn},
                       {"fn", f.confusion.fn}};
    fj["accuracy"] = f.rates.accuracy;
    fj["precision"] = f.rates.precision;
    fj["recall"] = f.rates.recall;
    fj["precision_undefined"] = f.rates.precision_undefined;
    fj["recall_undefined"] = f.rates.recall_undefined;
    fj["auc"] = f.roc.auc;
    fj["micro_auc"] = f.micro_macro.micro_auc;
    fj["macro_auc"] = f.micro_macro.macro_auc;
    fj["per_class_auc"] = f.micro_macro.per_class_auc;
    fj["chosen_hyperparameters"] = to_json(f.chosen);
    fj["scores"] = f.scores;
    fj["labels"] = f.labels;
    fj["trials"] = json::array();
    for (const auto& t : f.trials) fj["trials"].push_back(trial_json(t));
    doc["folds"].push_back(std::move(fj));
  }
  json agg;
  for (const auto& [name, s] : report.aggregates) agg[name] = summary_json(s);
  doc["aggregates"] = agg;
  doc["pooled_micro_auc"] = report.pooled_micro_auc;
  doc["pooled_macro_auc"] = report.pooled_macro_auc;
  return doc;
}

EvalReport report_from_json(const json& doc) {
  try {
    if (doc.at("schema") != "fcnet-eval-report") throw DataError("not an evaluation report");
    EvalReport r;
    r.schema_version = doc.at("schema_version");
    if (r.schema_version != kReportSchemaVersion) {
      throw DataError("unsupported report schema version " +
                      std::to_string(r.schema_version));
    }
    r.config_hash = doc.value("config_hash", "");
    r.seed = doc.value("seed", std::uint64_t{0});
    for (const auto& fj : doc.at("folds")) {
      FoldResult f;
      f.fold = fj.at("fold");
      f.seed = fj.at("seed");
      f.test_subjects = fj.at("test_subjects").get<std::vector<std::string>>();
      f.tuning_subjects = fj.at("tuning_subjects").get<std::vector<std::string>>();
      const auto& c = fj.at("confusion");
      f.confusion = {c.at("tp"), c.at("fp"), c.at("tn"), c.at("fn")};
      f.rates = precision_recall_accuracy(f.confusion);
      f.chosen = hyperparams_from_json(fj.at("chosen_hyperparameters"));
      f.scores = fj.at("scores").get<std::vector<double>>();
      f.labels = fj.at("labels").get<std::vector<int>>();
      f.roc = roc_auc(f.scores, f.labels);
      std::array<std::vector<double>, 2> per_class;
      for (const double s : f.scores) {
        per_class[0].push_back(1.0 - s);
        per_class[1].push_back(s);
      }
      f.micro_macro = micro_macro_auc(per_class, f.labels);
      // Stored values are authoritative (class-0 scores were the model's own).
      f.micro_macro.micro_auc = fj.at("micro_auc");
      f.micro_macro.macro_auc = fj.at("macro_auc");
      for (const auto& tj : fj.at("trials")) f.trials.push_back(trial_from_json(tj));
      r.folds.push_back(std::move(f));
    }
    aggregate(r);
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

std::string report_digest(const EvalReport& report) {
  return hex64(fnv1a64(to_json(report).dump()));
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << to_json(report).dump(2) << '\n';
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError("malformed report '" + path.string() + "': " + e.what());
  }
  return report_from_json(doc);
}

namespace {

struct PooledCurves {
  RocCurve class0, class1, micro;
  std::vector<std::pair<double, double>> macro;
  double auc0 = 0, auc1 = 0, micro_auc = 0, macro_auc = 0;
};

double interp_tpr(const RocCurve& c, double fpr) {
  // Highest TPR reached at this FPR (curves are monotone step/diagonal).
  double best = 0.0;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = c.points[i];
    if (p.fpr <= fpr) best = std::max(best, p.tpr);
    if (i > 0) {
      const auto& q = c.points[i - 1];
      if (q.fpr < fpr && fpr < p.fpr) {
        const double t = (fpr - q.fpr) / (p.fpr - q.fpr);
        best = std::max(best, q.tpr + t * (p.tpr - q.tpr));
      }
    }
  }
  return best;
}

PooledCurves pooled_curves(const EvalReport& report) {
  std::vector<double> s1, s0;
  std::vector<int> y1, y0;
  for (const auto& f : report.folds) {
    for (std::size_t i = 0; i < f.scores.size(); ++i) {
      s1.push_back(f.scores[i]);
      s0.push_back(1.0 - f.scores[i]);
      y1.push_back(f.labels[i]);
      y0.push_back(1 - f.labels[i]);
    }
  }
  PooledCurves out;
  auto r1 = roc_auc(s1, y1);
  auto r0 = roc_auc(s0, y0);
  std::vector<double> ps = s0;
  ps.insert(ps.end(), s1.begin(), s1.end());
  std::vector<int> py = y0;
  py.insert(py.end(), y1.begin(), y1.end());
  auto rm = roc_auc(ps, py);
  out.class0 = r0.curve;
  out.class1 = r1.curve;
  out.micro = rm.curve;
  out.auc0 = r0.auc;
  out.auc1 = r1.auc;
  out.micro_auc = rm.auc;
  out.macro_auc = 0.5 * (r0.auc + r1.auc);
  std::set<double> grid;
  for (const auto& p : out.class0.points) grid.insert(p.fpr);
  for (const auto& p : out.class1.points) grid.insert(p.fpr);
  for (const double x : grid) {
    out.macro.emplace_back(x, 0.5 * (interp_tpr(out.class0, x) + interp_tpr(out.class1, x)));
  }
  return out;
}

void write_curve_rows(std::ostream& out, const std::string& name, const RocCurve& c) {
  for (const auto& p : c.points) {
    out << name << ',';
    if (std::isinf(p.threshold)) {
      out << "inf";
    } else {
      out << p.threshold;
    }
    out << ',' << p.fpr << ',' << p.tpr << '\n';
  }
}

}  // namespace

void write_roc_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "curve,threshold,fpr,tpr\n";
  for (const auto& f : report.folds) {
    write_curve_rows(out, "fold" + std::to_string(f.fold), f.roc.curve);
  }
  const auto pooled = pooled_curves(report);
  write_curve_rows(out, "pooled_class0", pooled.class0);
  write_curve_rows(out, "pooled_class1", pooled.class1);
  write_curve_rows(out, "pooled_micro", pooled.micro);
}

std::string roc_svg(const EvalReport& report, const std::string& title) {
  const auto pooled = pooled_curves(report);
  constexpr double size = 360.0, left = 60.0, top = 40.0;
  const auto px = [&](double fpr) { return left + fpr * size; };
  const auto py = [&](double tpr) { return top + (1.0 - tpr) * size; };
  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << R"(<svg xmlns="http://www.w3.org/2000/svg" width="640" height="460" )"
      << R"(font-family="sans-serif" font-size="12">)" << '\n';
  svg << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n';
  svg << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n";
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << size
      << "\" height=\"" << size << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    svg << "<text x=\"" << px(v) - 8 << "\" y=\"" << top + size + 16 << "\">" << fmt(v, 1)
        << "</text>\n";
    svg << "<text x=\"" << left - 30 << "\" y=\"" << py(v) + 4 << "\">" << fmt(v, 1)
        << "</text>\n";
  }
  svg << "<text x=\"" << left + size / 2 - 50 << "\" y=\"" << top + size + 34
      << "\">False positive rate</text>\n";
  svg << "<text transform=\"translate(16," << top + size / 2 + 45
      << ") rotate(-90)\">True positive rate</text>\n";
  svg << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\""
      << py(1) << "\" stroke=\"gray\" stroke-dasharray=\"4,4\"/>\n";

  const auto polyline = [&](const std::vector<std::pair<double, double>>& pts,
                            const char* color, const char* dash) {
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"";
    if (*dash) svg << " stroke-dasharray=\"" << dash << "\"";
    svg << " points=\"";
    for (const auto& [x, y] : pts) svg << px(x) << ',' << py(y) << ' ';
    svg << "\"/>\n";
  };
  const auto pts = [](const RocCurve& c) {
    std::vector<std::pair<double, double>> v;
    for (const auto& p : c.points) v.emplace_back(p.fpr, p.tpr);
    return v;
  };
  struct Entry {
    std::string label;
    const char* color;
    const char* dash;
  };
  const std::vector<Entry> legend = {
      {"class 0 (AUC " + fmt(pooled.auc0, 2) + ")", "#1f77b4", ""},
      {"class 1 (AUC " + fmt(pooled.auc1, 2) + ")", "#d62728", ""},
      {"micro-average (AUC " + fmt(pooled.micro_auc, 2) + ")", "#2ca02c", "6,3"},
      {"macro-average (AUC " + fmt(pooled.macro_auc, 2) + ")", "#9467bd", "2,2"},
  };
  polyline(pts(pooled.class0), legend[0].color, legend[0].dash);
  polyline(pts(pooled.class1), legend[1].color, legend[1].dash);
  polyline(pts(pooled.micro), legend[2].color, legend[2].dash);
  polyline(pooled.macro, legend[3].color, legend[3].dash);
  for (std::size_t i = 0; i < legend.size(); ++i) {
    const double y = top + 20.0 + 20.0 * static_cast<double>(i);
    svg << "<line x1=\"" << left + size + 12 << "\" y1=\"" << y << "\" x2=\""
        << left + size + 36 << "\" y2=\"" << y << "\" stroke=\"" << legend[i].color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << left + size + 40 << "\" y=\"" << y + 4 << "\">"
        << legend[i].label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_roc_svg(const EvalReport& report, const std::string& title,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << roc_svg(report, title);
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  out << "fold  n   tp  fp  tn  fn  accuracy  precision  recall  auc\n";
  for (const auto& f : report.folds) {
    out << std::setw(4) << f.fold << std::setw(4) << f.scores.size() << std::setw(5)
        << f.confusion.tp << std::setw(4) << f.confusion.fp << std::setw(4) << f.confusion.tn
        << std::setw(4) << f.confusion.fn << "  " << std::setw(8) << fmt(f.rates.accuracy)
        << "  " << std::setw(9) << fmt(f.rates.precision) << "  " << std::setw(6)
        << fmt(f.rates.recall) << "  " << fmt(f.roc.auc) << '\n';
  }
  out << "\nmetric      mean    std\n";
  for (const auto& [name, s] : report.aggregates) {
    out << std::left << std::setw(10) << name << std::right << "  " << fmt(s.mean) << "  "
        << fmt(s.std) << '\n';
  }
  out << "pooled micro AUC " << fmt(report.pooled_micro_auc) << ", macro AUC "
      << fmt(report.pooled_macro_auc) << '\n';
  return out.str();
}

}  // namespace fcnet::eval
