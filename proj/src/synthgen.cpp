#include "fcnet/synthgen.hpp"

#include "fcnet/error.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace fcnet::synth {

namespace {

const std::vector<std::string> kAdChannels = {"Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8",
                                              "T3",  "C3",  "Cz", "C4", "T4", "T5", "P3",
                                              "Pz",  "P4",  "T6", "O1", "O2"};
const std::vector<std::string> kSzChannels = {"F7", "F3", "F4", "F8", "T3", "C3",
                                              "Cz", "C4", "T4", "T5", "P3", "Pz",
                                              "P4", "T6", "O1", "O2"};

constexpr double kBaseWeight = 0.3;
constexpr double kDeltaWeight = 0.6;

Eigen::MatrixXd edges_to_matrix(int n, const std::vector<Edge>& edges, double weight) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [target, driver] : edges) m(target, driver) = weight;
  return m;
}

// Every edge has driver < target, so the coefficient matrix is triangular
// and stays stationary under any per-subject jitter of the couplings.
CohortSpec layered_preset(const std::vector<std::string>& labels, int n_samples,
                          const std::vector<Edge>& base, const std::vector<Edge>& delta,
                          std::uint64_t seed) {
  const int n = static_cast<int>(labels.size());
  CohortSpec spec;
  spec.seed = seed;
  spec.n_subjects_per_class = 24;
  spec.inter_subject_jitter = 0.1;
  spec.class_a.n_channels = n;
  spec.class_a.adjacency = edges_to_matrix(n, base, kBaseWeight);
  spec.class_a.self_coeff = 0.5;
  spec.class_a.noise_sd = 1.0;
  spec.class_a.n_samples = n_samples;
  spec.class_a.burn_in = 200;
  spec.class_a.channel_labels = labels;
  spec.class_b = spec.class_a;
  spec.class_b.adjacency += edges_to_matrix(n, delta, kDeltaWeight);
  return spec;
}

}  // namespace

double VarNetworkSpec::spectral_radius() const {
  const Eigen::MatrixXd a =
      adjacency + self_coeff * Eigen::MatrixXd::Identity(n_channels, n_channels);
  return Eigen::EigenSolver<Eigen::MatrixXd>(a, false).eigenvalues().cwiseAbs().maxCoeff();
}

void VarNetworkSpec::validate() const {
  if (n_channels < 1) throw UsageError("VAR network needs at least one channel");
  if (adjacency.rows() != n_channels || adjacency.cols() != n_channels) {
    throw UsageError("adjacency must be n_channels x n_channels");
  }
  if (!channel_labels.empty() &&
      channel_labels.size() != static_cast<std::size_t>(n_channels)) {
    throw UsageError("channel label count does not match n_channels");
  }
  if (!(self_coeff > -1.0 && self_coeff < 1.0)) throw UsageError("self_coeff must lie in (-1, 1)");
  if (!(noise_sd > 0.0)) throw UsageError("noise_sd must be positive");
  if (n_samples < 2) throw UsageError("n_samples must be at least 2");
  if (burn_in < 0) throw UsageError("burn_in must be nonnegative");
  if (adjacency.diagonal().cwiseAbs().maxCoeff() != 0.0) {
    throw UsageError("adjacency diagonal must be zero; use self_coeff");
  }
  const double rho = spectral_radius();
  if (!(rho < 1.0)) {
    throw UsageError("VAR spec is not stationary (spectral radius " + std::to_string(rho) +
                     ")");
  }
}

Recording simulate_var(const VarNetworkSpec& spec, Rng& rng) {
  spec.validate();
  const int n = spec.n_channels;
  const Eigen::MatrixXd coeff =
      spec.adjacency + spec.self_coeff * Eigen::MatrixXd::Identity(n, n);
  std::normal_distribution<double> noise(0.0, spec.noise_sd);

  Recording rec;
  rec.sample_rate_hz = 128.0;
  if (spec.channel_labels.empty()) {
    for (int c = 0; c < n; ++c) rec.channel_labels.push_back("ch" + std::to_string(c));
  } else {
    rec.channel_labels = spec.channel_labels;
  }
  rec.data.resize(n, spec.n_samples);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd next(n);
  for (int t = 0; t < spec.burn_in + spec.n_samples; ++t) {
    next.noalias() = coeff * x;
    for (int c = 0; c < n; ++c) next(c) += noise(rng);
    x.swap(next);
    if (t >= spec.burn_in) rec.data.col(t - spec.burn_in) = x;
  }
  return rec;
}

SyntheticCohort generate_cohort(const CohortSpec& spec, std::size_t jobs) {
  spec.class_a.validate();
  spec.class_b.validate();
  if (spec.class_a.n_channels != spec.class_b.n_channels ||
      spec.class_a.n_samples != spec.class_b.n_samples) {
    throw UsageError("class networks must share channel and sample counts");
  }
  if (spec.n_subjects_per_class < 1) throw UsageError("need at least one subject per class");
  if (spec.inter_subject_jitter < 0.0) throw UsageError("jitter must be nonnegative");

  const auto per_class = static_cast<std::size_t>(spec.n_subjects_per_class);
  SyntheticCohort out;
  out.cohort.class_names = spec.class_names;
  out.cohort.recordings.resize(2 * per_class);
  out.subject_adjacency.resize(2 * per_class);

  parallel_for(2 * per_class, jobs, [&](std::size_t k) {
    const int cls = static_cast<int>(k / per_class);
    const std::size_t index = k % per_class;
    const VarNetworkSpec& base = cls == 0 ? spec.class_a : spec.class_b;
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(cls) + 1, index));
    VarNetworkSpec subject = base;
    if (spec.inter_subject_jitter > 0.0) {
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (Eigen::Index i = 0; i < subject.adjacency.rows(); ++i) {
        for (Eigen::Index j = 0; j < subject.adjacency.cols(); ++j) {
          const double z = gauss(rng);
          subject.adjacency(i, j) *= 1.0 + spec.inter_subject_jitter * z;
        }
      }
    }
    Recording rec = simulate_var(subject, rng);
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%03zu", spec.class_names[static_cast<std::size_t>(cls)].c_str(),
                  index);
    rec.subject_id = id;
    rec.label = cls;
    out.cohort.recordings[k] = std::move(rec);
    out.subject_adjacency[k] = subject.adjacency;
  });
  out.cohort.validate();
  return out;
}

std::set<Edge> ground_truth_delta(const CohortSpec& spec) {
  std::set<Edge> delta;
  const auto& a = spec.class_a.adjacency;
  const auto& b = spec.class_b.adjacency;
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError("class adjacencies differ in shape");
  }
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if ((a(i, j) != 0.0) != (b(i, j) != 0.0)) {
        delta.emplace(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  return delta;
}

CohortSpec preset_ad_like(std::uint64_t seed) {
  return layered_preset(kAdChannels, 1024,
                        {{3, 0}, {5, 2}, {8, 4}, {10, 9}, {13, 12}, {15, 14}, {17, 16}, {18, 13}},
                        {{6, 1}, {9, 3}, {11, 7}, {14, 8}, {16, 10}, {12, 2}}, seed);
}

CohortSpec preset_sz_like(std::uint64_t seed) {
  return layered_preset(kSzChannels, 7680,
                        {{2, 0}, {4, 1}, {7, 5}, {9, 8}, {12, 10}, {15, 13}},
                        {{3, 0}, {6, 2}, {8, 4}, {11, 7}, {13, 9}, {14, 12}}, seed);
}

CohortSpec preset_null(std::uint64_t seed) {
  CohortSpec spec = preset_ad_like(seed);
  spec.class_b = spec.class_a;
  return spec;
}

CohortSpec preset(const std::string& name, std::uint64_t seed) {
  if (name == "ad_like") return preset_ad_like(seed);
  if (name == "sz_like") return preset_sz_like(seed);
  if (name == "null") return preset_null(seed);
  throw UsageError("unknown synthetic preset '" + name + "'");
}

void write_cohort(const SyntheticCohort& data, const CohortSpec& spec,
                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  CohortManifest manifest;
  manifest.class_names = data.cohort.class_names;
  manifest.sample_rate_hz = data.cohort.recordings.front().sample_rate_hz;
  nlohmann::json truth;
  truth["seed"] = spec.seed;
  truth["inter_subject_jitter"] = spec.inter_subject_jitter;
  truth["class_delta"] = nlohmann::json::array();
  for (const auto& [target, driver] : ground_truth_delta(spec)) {
    truth["class_delta"].push_back({{"target", target}, {"driver", driver}});
  }
  truth["subjects"] = nlohmann::json::array();
  for (std::size_t k = 0; k < data.cohort.recordings.size(); ++k) {
    const auto& rec = data.cohort.recordings[k];
    const std::string file = rec.subject_id + ".csv";
    write_recording(rec, dir / file);
    manifest.entries.push_back(
        {file, data.cohort.class_names[static_cast<std::size_t>(*rec.label)], rec.subject_id});
    const auto& adj = data.subject_adjacency[k];
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < adj.rows(); ++i) {
      std::vector<double> row(adj.cols());
      for (Eigen::Index j = 0; j < adj.cols(); ++j) row[static_cast<std::size_t>(j)] = adj(i, j);
      rows.push_back(row);
    }
    truth["subjects"].push_back({{"subject_id", rec.subject_id},
                                 {"label", manifest.entries.back().label},
                                 {"adjacency", rows}});
  }
  write_manifest(manifest, dir / "manifest.json");
  std::ofstream out(dir / "ground_truth.json");
  out << truth.dump(2) << '\n';
}

}  // namespace fcnet::synth
