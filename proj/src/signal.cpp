#include "fcnet/signal.hpp"

#include "fcnet/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace fcnet {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      return cells;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

double parse_cell(std::string_view cell, const std::filesystem::path& path,
                  std::size_t line_no) {
  double value = 0.0;
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << path.string() << ":" << line_no << ": non-numeric or non-finite cell '"
        << cell << "'";
    throw DataError(msg.str());
  }
  return value;
}

}  // namespace

void Recording::validate() const {
  if (channel_labels.size() != n_channels()) {
    throw DataError("recording '" + subject_id + "': " +
                    std::to_string(channel_labels.size()) + " labels for " +
                    std::to_string(n_channels()) + " channels");
  }
  std::unordered_set<std::string> seen;
  for (const auto& label : channel_labels) {
    if (!seen.insert(label).second) {
      throw DataError("recording '" + subject_id + "': duplicate channel label '" +
                      label + "'");
    }
  }
  if (n_samples() < 2) {
    throw DataError("recording '" + subject_id + "': fewer than 2 samples");
  }
  if (!(sample_rate_hz > 0.0)) {
    throw DataError("recording '" + subject_id + "': sample rate must be positive");
  }
  if (!data.allFinite()) {
    throw DataError("recording '" + subject_id + "': non-finite sample");
  }
}

void Cohort::validate() const {
  if (recordings.empty()) throw DataError("cohort is empty");
  if (class_names[0] == class_names[1]) throw DataError("class names must differ");
  const auto& ref = recordings.front();
  int per_class[2] = {0, 0};
  for (const auto& rec : recordings) {
    rec.validate();
    if (!rec.label || (*rec.label != 0 && *rec.label != 1)) {
      throw DataError("recording '" + rec.subject_id + "' has no class label");
    }
    ++per_class[*rec.label];
    if (rec.channel_labels != ref.channel_labels) {
      throw DataError("recording '" + rec.subject_id +
                      "' does not share the cohort channel layout");
    }
    if (rec.sample_rate_hz != ref.sample_rate_hz) {
      throw DataError("recording '" + rec.subject_id +
                      "' does not share the cohort sample rate");
    }
  }
  for (int c = 0; c < 2; ++c) {
    if (per_class[c] == 0) {
      throw DataError("cohort has no recording of class '" + class_names[c] + "'");
    }
  }
}

std::vector<std::string> Cohort::subject_ids() const {
  std::vector<std::string> ids;
  std::unordered_set<std::string> seen;
  for (const auto& rec : recordings) {
    if (seen.insert(rec.subject_id).second) ids.push_back(rec.subject_id);
  }
  return ids;
}

Recording load_recording(const std::filesystem::path& path,
                         std::optional<ClassIndex> label, double sample_rate_hz) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open recording '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("recording '" + path.string() + "' is empty");
  }
  Recording rec;
  rec.subject_id = path.stem().string();
  rec.sample_rate_hz = sample_rate_hz;
  rec.label = label;
  for (auto cell : split_csv(line)) rec.channel_labels.emplace_back(cell);
  const std::size_t n_channels = rec.channel_labels.size();

  std::vector<double> values;
  std::size_t line_no = 1;
  std::size_t n_samples = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != n_channels) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(n_channels) + " cells, found " +
                      std::to_string(cells.size()));
    }
    for (auto cell : cells) values.push_back(parse_cell(cell, path, line_no));
    ++n_samples;
  }

  rec.data.resize(static_cast<Eigen::Index>(n_channels),
                  static_cast<Eigen::Index>(n_samples));
  for (std::size_t t = 0; t < n_samples; ++t) {
    for (std::size_t c = 0; c < n_channels; ++c) {
      rec.data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) =
          values[t * n_channels + c];
    }
  }
  rec.validate();
  return rec;
}

void write_recording(const Recording& rec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write recording '" + path.string() + "'");
  for (std::size_t c = 0; c < rec.channel_labels.size(); ++c) {
    if (c) out << ',';
    out << rec.channel_labels[c];
  }
  out << '\n';
  char buf[32];
  for (Eigen::Index t = 0; t < rec.data.cols(); ++t) {
    for (Eigen::Index c = 0; c < rec.data.rows(); ++c) {
      if (c) out << ',';
      const auto res = std::to_chars(buf, buf + sizeof(buf), rec.data(c, t));
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing recording '" + path.string() + "'");
}

Recording zscore(const Recording& rec) {
  Recording out = rec;
  const double n = static_cast<double>(rec.n_samples());
  for (Eigen::Index c = 0; c < rec.data.rows(); ++c) {
    auto row = out.data.row(c);
    const double mean = row.mean();
    row.array() -= mean;
    const double sd = std::sqrt(row.squaredNorm() / (n - 1.0));
    if (!(sd > 0.0) || sd <= 1e-300) {
      throw DataError("recording '" + rec.subject_id + "': channel '" +
                      rec.channel_labels[static_cast<std::size_t>(c)] +
                      "' is constant");
    }
    row /= sd;
  }
  return out;
}

std::vector<Recording> window(const Recording& rec, std::size_t length,
                              std::size_t stride) {
  if (length < 1 || stride < 1) {
    throw UsageError("window length and stride must be at least 1");
  }
  if (length > rec.n_samples()) {
    throw UsageError("window length " + std::to_string(length) + " exceeds " +
                     std::to_string(rec.n_samples()) + " samples");
  }
  const std::size_t count = (rec.n_samples() - length) / stride + 1;
  std::vector<Recording> windows;
  windows.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    Recording piece;
    piece.subject_id = rec.subject_id;
    piece.channel_labels = rec.channel_labels;
    piece.sample_rate_hz = rec.sample_rate_hz;
    piece.label = rec.label;
    piece.data = rec.data.middleCols(static_cast<Eigen::Index>(w * stride),
                                     static_cast<Eigen::Index>(length));
    windows.push_back(std::move(piece));
  }
  return windows;
}

CohortManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
    CohortManifest manifest;
    if (doc.contains("class_names")) {
      const auto names = doc.at("class_names").get<std::vector<std::string>>();
      if (names.size() != 2) throw DataError("manifest needs exactly two class names");
      manifest.class_names = {names[0], names[1]};
    }
    manifest.sample_rate_hz = doc.value("sample_rate_hz", 128.0);
    for (const auto& item : doc.at("recordings")) {
      ManifestEntry entry;
      entry.path = item.at("path").get<std::string>();
      entry.label = item.at("label").get<std::string>();
      entry.subject_id =
          item.value("subject_id", std::filesystem::path(entry.path).stem().string());
      manifest.entries.push_back(std::move(entry));
    }
    return manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest '" + path.string() + "': " + e.what());
  }
}

void write_manifest(const CohortManifest& manifest,
                    const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["class_names"] = {manifest.class_names[0], manifest.class_names[1]};
  doc["sample_rate_hz"] = manifest.sample_rate_hz;
  doc["recordings"] = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    doc["recordings"].push_back(
        {{"path", e.path}, {"label", e.label}, {"subject_id", e.subject_id}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

Cohort load_cohort(const std::filesystem::path& manifest_path) {
  const auto manifest = read_manifest(manifest_path);
  if (manifest.entries.empty()) {
    throw DataError("manifest '" + manifest_path.string() + "' lists no recordings");
  }
  const auto base = manifest_path.parent_path();
  Cohort cohort;
  cohort.class_names = manifest.class_names;
  for (const auto& entry : manifest.entries) {
    ClassIndex label;
    if (entry.label == manifest.class_names[0]) {
      label = 0;
    } else if (entry.label == manifest.class_names[1]) {
      label = 1;
    } else {
      throw DataError("recording '" + entry.subject_id + "' has unknown label '" +
                      entry.label + "'");
    }
    std::filesystem::path p = entry.path;
    if (p.is_relative()) p = base / p;
    auto rec = load_recording(p, label, manifest.sample_rate_hz);
    rec.subject_id = entry.subject_id;
    cohort.recordings.push_back(std::move(rec));
  }
  cohort.validate();
  return cohort;
}

}  // namespace fcnet
