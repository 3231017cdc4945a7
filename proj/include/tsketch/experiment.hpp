#ifndef TSKETCH_EXPERIMENT_HPP
#define TSKETCH_EXPERIMENT_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tsketch/ensemble.hpp"
#include "tsketch/eval.hpp"
#include "tsketch/sketch.hpp"

namespace tsketch {

enum class Generator { lowrank, superdiag_exp, superdiag_poly, file };
enum class Variant { one_pass, two_pass, recycled };
/// How the m and m_c lists combine: every pair, or element-wise.
enum class Pairing { grid, zip };

std::string_view to_string(Generator g) noexcept;
std::string_view to_string(Variant v) noexcept;
std::optional<Generator> parse_generator(std::string_view name) noexcept;
std::optional<Variant> parse_variant(std::string_view name) noexcept;

struct ExperimentConfig {
  Generator generator = Generator::lowrank;
  /// Observed tensor for Generator::file, and optionally its clean version.
  std::string input_path;
  std::string clean_path;
  Index n = 40;
  Index d = 3;
  Index r_true = 5;
  Index r_fit = 5;
  std::optional<double> snr_db;
  LooKind loo_kind = LooKind::kronecker;
  /// One family for every mode, or one per mode ("mix").
  std::vector<Family> loo_families{Family::gaussian};
  Family diag_family = Family::identity;
  std::vector<Family> core_families{Family::gaussian};
  std::vector<Index> m{15};
  std::vector<Index> m_c{15};
  Pairing pairing = Pairing::grid;
  std::vector<Variant> variants{Variant::one_pass, Variant::two_pass};
  /// eps used for the bound_rhs column.
  double bound_eps = 0.5;
  /// Tail energies need a full SVD of every unfolding; skip them for speed.
  bool compute_tails = true;
  Index trials = 1;
  std::uint64_t seed = 0;
  std::string output = "results.csv";
  Index threads = 1;

  void validate() const;
  std::vector<std::pair<Index, Index>> budget_pairs() const;
  /// Seeds are pure functions of (seed, trial[, m, m_c]).
  std::uint64_t data_seed(Index trial) const;
  std::uint64_t plan_seed(Index trial, Index m, Index m_c) const;
  SketchPlan plan_for(const Shape& shape, Index trial, Index m, Index m_c) const;
};

std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Observed and clean tensors for one trial; `truth` holds the true factors
/// when the generator knows them.
struct TrialData {
  DenseTensor observed;
  DenseTensor clean;
  std::vector<Matrix> truth;
};

TrialData make_data(const ExperimentConfig& config, Index trial);

struct ResultRow {
  Index trial = 0;
  Index m = 0;
  Index m_c = 0;
  Variant variant = Variant::one_pass;
  double relative_error = 0.0;
  /// ||X - X_hat|| against the observed tensor.
  double abs_error = 0.0;
  double snr_db = 0.0;
  /// Largest principal angle over modes; NaN without ground-truth factors.
  double max_angle_deg = 0.0;
  /// sum_j Delta_{r,j} of the observed tensor; NaN when not computed.
  double tail_sum = 0.0;
  double bound_rhs = 0.0;
  Index storage_entries = 0;
  double t_sketch = 0.0;
  double t_factor = 0.0;
  double t_core = 0.0;
  std::uint64_t data_seed = 0;
  std::uint64_t plan_seed = 0;
};

/// Every (m, m_c) pair and variant for one trial.
std::vector<ResultRow> run_trial(const ExperimentConfig& config, Index trial);

/// All trials on config.threads workers, sorted by (trial, m, m_c, variant).
std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

inline constexpr std::string_view kCsvVersion = "tsketch-results v1";
void write_csv(std::ostream& out, const std::vector<ResultRow>& rows);

}  // namespace tsketch

#endif  // TSKETCH_EXPERIMENT_HPP
