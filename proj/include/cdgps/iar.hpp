#pragma once

// Integer ambiguity resolution: LDL factorization, integer decorrelation,
// bootstrapping, integer least-squares search (classical and sensor
// constrained), acceptance tests and partial-subset selection.

#include "cdgps/common.hpp"
#include "cdgps/measurements.hpp"

#include <optional>
#include <vector>

namespace cdgps::iar {

struct LdlFactors {
  MatX lower;  // unit lower-triangular
  VecX diag;   // conditional variances, > 0
};

/// Factor a symmetric positive-definite matrix as L * diag(D) * L^T.
/// Throws DecompositionError naming the first non-positive pivot (1-based).
LdlFactors ldl_decompose(const MatX& covariance);

/// Float ambiguities together with their covariance, expressed in the space
/// produced by `z_matrix` (current = Z^T * original). A fresh distribution
/// has Z = I.
struct AmbiguityDistribution {
  VecX floats;
  MatX covariance;
  IntMat z_matrix;
  IntMat z_inverse;
  MatX lower;
  VecX diag;
  double search_width = 0.0;

  int size() const { return static_cast<int>(floats.size()); }

  /// Original-space integers Z^-T * n_z (exact integer arithmetic).
  IntVec to_original(const IntVec& n_z) const;
  /// Current-space integers Z^T * n.
  IntVec to_current(const IntVec& n) const;
};

/// Builds a distribution with Z = I and its LDL factors.
AmbiguityDistribution make_distribution(const VecX& floats,
                                        const MatX& covariance);

/// Maximum absolute off-diagonal correlation coefficient.
double max_correlation(const MatX& covariance);

/// Integer-preserving decorrelation (Gauss reductions of L interleaved with
/// adjacent swaps that order conditional variances ascending in conditioning
/// order). Falls back to the identity if the reduced correlation would be
/// worse than the input.
AmbiguityDistribution decorrelate(const AmbiguityDistribution& dist);

/// Round half away from zero.
std::int64_t round_integer(double x);

/// Sequential conditional rounding using the distribution's LDL factors.
IntVec bootstrap(const AmbiguityDistribution& dist);

/// ||candidate - floats||^2 weighted by the inverse covariance.
double quadratic_cost(const AmbiguityDistribution& dist, const IntVec& candidate);

/// Mahalanobis distance between the bootstrapped vector and the floats.
double search_width(const AmbiguityDistribution& dist, const IntVec& bootstrapped);

struct IntegerSearchResult {
  IntVec best;
  IntVec second_best;
  double cost_best = 0.0;
  double cost_second = 0.0;
  double cost_init = 0.0;
  double success_prob = 0.0;
  std::optional<double> discrimination_ratio;  // empty on a degenerate tie
  int accepted_subset_size = 0;
  bool degenerate = false;  // search region collapsed to the bootstrap
  // Lowest-cost distinct candidates seen by the search, ascending cost.
  std::vector<std::pair<IntVec, double>> evaluated;
};

/// Exact two-best integer least-squares over the box of half-width
/// ceil(chi) + 2 around the bootstrap (depth-first with ellipsoid pruning).
IntegerSearchResult classical_ils_search(const AmbiguityDistribution& dist);

/// External-sensor data used to penalise integer candidates.
struct ConstraintContext {
  // Observed range [m], azimuth alpha [rad], elevation epsilon [rad].
  double range = 0.0;
  double azimuth = 0.0;
  double elevation = 0.0;
  double sigma_range = 0.0;
  double sigma_azimuth = 0.0;
  double sigma_elevation = 0.0;
  bool range_enabled = false;
  bool azimuth_enabled = false;
  bool elevation_enabled = false;
  // Range used for the 1/R angle weighting when the range sensor is off.
  double estimated_range = 0.0;
  SensorBiases biases;

  MatX geometry;        // k x 3 DDCP line-of-sight differences
  VecX ddcp_phases;     // k DDCP observations [cycles]
  Mat3 dcm_eci_to_sensor = Mat3::Identity();
  double wavelength = constants::kL1Wavelength;

  // Rows of `geometry` that the searched ambiguities map onto (in order);
  // the remaining rows use `known_ambiguities`. Empty means identity.
  std::vector<int> search_rows;
  IntVec known_ambiguities;

  bool any_enabled() const {
    return range_enabled || azimuth_enabled || elevation_enabled;
  }
  /// Checks the DCM and sigma invariants; throws FrameError / Error.
  void validate() const;
};

/// Least-squares baseline (ECI, meters) from DDCP phases for a full-length
/// candidate vector in undifferenced DDCP space.
Vec3 candidate_baseline(const ConstraintContext& ctx, const IntVec& candidate);

struct ComputedObservables {
  double range = 0.0;
  double azimuth = 0.0;
  double elevation = 0.0;
};

/// Noise-weighted observed-minus-computed penalty for enabled sensors.
double penalty_cost(const ConstraintContext& ctx, const ComputedObservables& computed);

/// Hooke-Jeeves best-neighbour integer search started from the bootstrap with
/// initial step `step`, minimising the quadratic cost plus the external-sensor
/// penalty. Throws SingularGeometryError when the baseline cannot be solved.
IntegerSearchResult constrained_search(const AmbiguityDistribution& dist,
                                       const ConstraintContext& ctx, int step = 2);

/// Modified closed-form success rate over the first `subset_size` entries of
/// `diag`: prod sqrt(1 - exp(-S^gamma / (8 d_i^2))).
double success_rate(const VecX& diag, int subset_size, double s_coefficient = 1.0,
                    double gamma = 1.0);

/// Ratio test: cost_second / cost_best > kappa. Both-zero ties are rejected.
bool discrimination_test(double cost_best, double cost_second, double kappa_d);

struct GammaRule {
  enum class Kind { kInverseSubsetSize, kFixed } kind = Kind::kInverseSubsetSize;
  double value = 1.0;
  double gamma(int m) const {
    return kind == Kind::kInverseSubsetSize ? 1.0 / static_cast<double>(m) : value;
  }
};

struct PartialFix {
  std::vector<int> fixed_indices;  // indices into the (current-space) vector
  IntVec fixed_values;
  double success_prob = 0.0;       // modified success rate of the accepted prefix
  double last_success_prob = 0.0;  // rate of the first rejected prefix (or full set)
};

/// Largest prefix of the variance-sorted ambiguities that passes both the
/// modified success-rate test and the discrimination test.
PartialFix partial_resolve(const AmbiguityDistribution& dist,
                           const IntegerSearchResult& result, double kappa_p,
                           double kappa_d, GammaRule gamma_rule = {});

}  // namespace cdgps::iar
