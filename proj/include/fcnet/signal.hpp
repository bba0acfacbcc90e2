#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fcnet {

/// Row-major so each channel is a contiguous run of samples.
using SignalMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Class index: 0 is the control (negative) class, 1 the patient (positive).
using ClassIndex = int;

/// One subject's multichannel recording, stored as [channels x samples].
struct Recording {
  std::string subject_id;
  std::vector<std::string> channel_labels;
  double sample_rate_hz = 128.0;
  SignalMatrix data;
  std::optional<ClassIndex> label;

  std::size_t n_channels() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t n_samples() const { return static_cast<std::size_t>(data.cols()); }

  /// Throws DataError when any Recording invariant is violated.
  void validate() const;
};

struct Cohort {
  std::vector<Recording> recordings;
  std::array<std::string, 2> class_names{"control", "patient"};

  /// Checks labels, shared montage and sample rate, and class coverage.
  void validate() const;

  /// Distinct subject ids in first-appearance order.
  std::vector<std::string> subject_ids() const;
};

/// Reads a CSV with a header row of channel labels and one row per sample.
Recording load_recording(const std::filesystem::path& path,
                         std::optional<ClassIndex> label = std::nullopt,
                         double sample_rate_hz = 128.0);

/// Writes the CSV layout read by load_recording, using shortest round-trip
/// formatting so every double reloads bit-identically.
void write_recording(const Recording& rec, const std::filesystem::path& path);

/// Per-channel standardization to zero mean and unit sample standard
/// deviation (n - 1 denominator).
Recording zscore(const Recording& rec);

/// Sliding windows of `length` samples every `stride` samples. Windows keep
/// the subject id and label of the source recording.
std::vector<Recording> window(const Recording& rec, std::size_t length,
                              std::size_t stride);

/// Cohort manifest: JSON document
///   {"class_names": [a, b],
///    "sample_rate_hz": 128,
///    "recordings": [{"path": ..., "label": a|b, "subject_id": ...}, ...]}
/// Relative paths resolve against the manifest's directory.
struct ManifestEntry {
  std::string path;
  std::string label;
  std::string subject_id;
};

struct CohortManifest {
  std::array<std::string, 2> class_names{"control", "patient"};
  double sample_rate_hz = 128.0;
  std::vector<ManifestEntry> entries;
};

CohortManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const CohortManifest& manifest,
                    const std::filesystem::path& path);
Cohort load_cohort(const std::filesystem::path& manifest_path);

}  // namespace fcnet
