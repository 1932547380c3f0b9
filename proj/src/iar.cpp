#include "cdgps/iar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace cdgps::iar {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MatX to_double(const IntMat& m) { return m.cast<double>(); }

// Keeps the `capacity` lowest-cost distinct candidates.
class CandidateList {
 public:
  explicit CandidateList(std::size_t capacity) : capacity_(capacity) {}

  void offer(const IntVec& v, double cost) {
    for (const auto& c : items_) {
      if (c.first == v) return;
    }
    if (items_.size() == capacity_ && cost >= items_.back().second) return;
    auto it = std::lower_bound(items_.begin(), items_.end(), cost,
                               [](const auto& a, double c) { return a.second < c; });
    items_.insert(it, {v, cost});
    if (items_.size() > capacity_) items_.pop_back();
  }

  double bound() const {
    return items_.size() < std::min<std::size_t>(2, capacity_) ? kInf
                                                               : items_[1].second;
  }
  const std::vector<std::pair<IntVec, double>>& items() const { return items_; }

 private:
  std::size_t capacity_;
  std::vector<std::pair<IntVec, double>> items_;
};

// (G^T G)^-1 G^T, computed once per context.
class BaselineSolver {
 public:
  explicit BaselineSolver(const ConstraintContext& ctx) : ctx_(ctx) {
    const MatX& g = ctx.geometry;
    if (g.cols() != 3 || g.rows() < 3 || g.rows() != ctx.ddcp_phases.size()) {
      throw SingularGeometryError("DDCP geometry needs at least 3 rows of 3 columns");
    }
    Eigen::JacobiSVD<MatX> svd(g);
    const auto& s = svd.singularValues();
    if (s(2) <= 1e-9 * std::max(1.0, s(0))) {
      throw SingularGeometryError("DDCP geometry is rank deficient");
    }
    const Eigen::Matrix3d gtg = g.transpose() * g;
    pinv_ = gtg.inverse() * g.transpose();
  }

  Vec3 solve(const IntVec& full_candidate) const {
    const VecX rhs =
        ctx_.wavelength * (ctx_.ddcp_phases - full_candidate.cast<double>());
    return pinv_ * rhs;
  }

 private:
  const ConstraintContext& ctx_;
  Eigen::Matrix<double, 3, Eigen::Dynamic> pinv_;
};

IntVec assemble_full(const ConstraintContext& ctx, const IntVec& searched) {
  if (ctx.search_rows.empty()) return searched;
  IntVec full = ctx.known_ambiguities;
  for (std::size_t j = 0; j < ctx.search_rows.size(); ++j) {
    full(ctx.search_rows[j]) = searched(static_cast<Eigen::Index>(j));
  }
  return full;
}

double external_cost(const ConstraintContext& ctx, const BaselineSolver& solver,
                     const IntVec& full_candidate) {
  const Vec3 rho = ctx.dcm_eci_to_sensor * solver.solve(full_candidate);
  try {
    ComputedObservables computed;
    computed.range = meas::range_model(rho, ctx.biases);
    if (ctx.azimuth_enabled || ctx.elevation_enabled) {
      const BearingObs b = meas::bearing_model(rho, ctx.biases);
      computed.azimuth = b.azimuth;
      computed.elevation = b.elevation;
    }
    return penalty_cost(ctx, computed);
  } catch (const SingularGeometryError&) {
    return kInf;
  }
}

void finish_result(IntegerSearchResult& r) {
  if (r.cost_best == 0.0 && r.cost_second == 0.0) {
    r.discrimination_ratio.reset();
  } else if (r.cost_best == 0.0) {
    r.discrimination_ratio = kInf;
  } else {
    r.discrimination_ratio = r.cost_second / r.cost_best;
  }
}

}  // namespace

LdlFactors ldl_decompose(const MatX& q) {
  const Eigen::Index n = q.rows();
  if (q.cols() != n) throw Error("ldl_decompose: matrix is not square");
  const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error("ldl_decompose: matrix is not symmetric");
  }
  LdlFactors f{MatX::Identity(n, n), VecX::Zero(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = q(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= f.lower(j, k) * f.lower(j, k) * f.diag(k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw DecompositionError(static_cast<int>(j + 1),
                               "non-positive conditional variance at pivot " +
                                   std::to_string(j + 1));
    }
    f.diag(j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = q(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= f.lower(i, k) * f.lower(j, k) * f.diag(k);
      f.lower(i, j) = v / d;
    }
  }
  return f;
}

IntVec AmbiguityDistribution::to_original(const IntVec& n_z) const {
  return z_inverse.transpose() * n_z;
}

IntVec AmbiguityDistribution::to_current(const IntVec& n) const {
  return z_matrix.transpose() * n;
}

AmbiguityDistribution make_distribution(const VecX& floats, const MatX& covariance) {
  if (covariance.rows() != floats.size() || covariance.cols() != floats.size()) {
    throw Error("make_distribution: dimension mismatch");
  }
  const auto n = floats.size();
  AmbiguityDistribution d;
  d.floats = floats;
  d.covariance = 0.5 * (covariance + covariance.transpose());
  d.z_matrix = IntMat::Identity(n, n);
  d.z_inverse = IntMat::Identity(n, n);
  LdlFactors f = ldl_decompose(d.covariance);
  d.lower = std::move(f.lower);
  d.diag = std::move(f.diag);
  d.search_width = n > 0 ? search_width(d, bootstrap(d)) : 0.0;
  return d;
}

double max_correlation(const MatX& c) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      m = std::max(m, std::abs(c(i, j)) / std::sqrt(c(i, i) * c(j, j)));
    }
  }
  return m;
}

AmbiguityDistribution decorrelate(const AmbiguityDistribution& dist) {
  const Eigen::Index n = dist.floats.size();
  IntMat z = IntMat::Identity(n, n);
  IntMat zi = IntMat::Identity(n, n);
  const MatX& q = dist.covariance;

  for (int iter = 0; iter < 100000; ++iter) {
    const MatX qz = to_double(z).transpose() * q * to_double(z);
    LdlFactors f = ldl_decompose(0.5 * (qz + qz.transpose()));
    for (Eigen::Index j = n - 2; j >= 0; --j) {
      for (Eigen::Index i = j + 1; i < n; ++i) {
        const std::int64_t mu = round_integer(f.lower(i, j));
        if (mu == 0) continue;
        f.lower.row(i).head(j + 1) -= static_cast<double>(mu) * f.lower.row(j).head(j + 1);
        z.col(i) -= mu * z.col(j);
        zi.row(j) += mu * zi.row(i);
      }
    }
    bool swapped = false;
    for (Eigen::Index k = n - 2; k >= 0; --k) {
      const double l = f.lower(k + 1, k);
      const double delta = f.diag(k) * l * l + f.diag(k + 1);
      if (delta < f.diag(k) * (1.0 - 1e-12)) {
        z.col(k).swap(z.col(k + 1));
        zi.row(k).swap(zi.row(k + 1));
        swapped = true;
        break;
      }
    }
    if (!swapped) break;
  }

  MatX qz = to_double(z).transpose() * q * to_double(z);
  qz = 0.5 * (qz + qz.transpose());
  if (max_correlation(qz) > max_correlation(q) + 1e-15) {
    z = IntMat::Identity(n, n);
    zi = IntMat::Identity(n, n);
    qz = q;
  }

  AmbiguityDistribution out;
  out.floats = to_double(z).transpose() * dist.floats;
  out.covariance = qz;
  out.z_matrix = dist.z_matrix * z;
  out.z_inverse = zi * dist.z_inverse;
  LdlFactors f = ldl_decompose(qz);
  out.lower = std::move(f.lower);
  out.diag = std::move(f.diag);
  out.search_width = n > 0 ? search_width(out, bootstrap(out)) : 0.0;
  return out;
}

std::int64_t round_integer(double x) { return static_cast<std::int64_t>(std::round(x)); }

IntVec bootstrap(const AmbiguityDistribution& dist) {
  const Eigen::Index n = dist.floats.size();
  IntVec fixed(n);
  VecX cond(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double c = dist.floats(i);
    for (Eigen::Index j = 0; j < i; ++j) {
      c -= dist.lower(i, j) * (cond(j) - static_cast<double>(fixed(j)));
    }
    cond(i) = c;
    fixed(i) = round_integer(c);
  }
  return fixed;
}

double quadratic_cost(const AmbiguityDistribution& dist, const IntVec& candidate) {
  const VecX r = candidate.cast<double>() - dist.floats;
  const VecX y = dist.lower.triangularView<Eigen::UnitLower>().solve(r);
  return (y.array().square() / dist.diag.array()).sum();
}

double search_width(const AmbiguityDistribution& dist, const IntVec& bootstrapped) {
  return quadratic_cost(dist, bootstrapped);
}

IntegerSearchResult classical_ils_search(const AmbiguityDistribution& dist) {
  const int n = dist.size();
  IntegerSearchResult r;
  const IntVec boot = bootstrap(dist);
  r.cost_init = quadratic_cost(dist, boot);
  if (n == 0) {
    r.best = r.second_best = boot;
    r.degenerate = true;
    finish_result(r);
    return r;
  }
  const auto half_width =
      static_cast<std::int64_t>(std::ceil(search_width(dist, boot))) + 2;

  CandidateList list(static_cast<std::size_t>(2 * n + 2));
  IntVec cur(n);
  VecX cond(n);

  // Depth-first enumeration in conditioning order with ellipsoid pruning.
  auto descend = [&](auto&& self, int i, double partial) -> void {
    double c = dist.floats(i);
    for (int j = 0; j < i; ++j) c -= dist.lower(i, j) * (cond(j) - static_cast<double>(cur(j)));
    cond(i) = c;
    const std::int64_t lo = boot(i) - half_width;
    const std::int64_t hi = boot(i) + half_width;
    const std::int64_t centre = std::clamp(round_integer(c), lo, hi);
    // Zig-zag outward from the nearest integer.
    std::int64_t up = centre, down = centre - 1;
    while (up <= hi || down >= lo) {
      std::int64_t v;
      const double du = up <= hi ? std::abs(static_cast<double>(up) - c) : kInf;
      const double dd = down >= lo ? std::abs(static_cast<double>(down) - c) : kInf;
      if (du <= dd) {
        v = up++;
      } else {
        v = down--;
      }
      const double inc = (static_cast<double>(v) - c) * (static_cast<double>(v) - c) / dist.diag(i);
      if (partial + inc >= list.bound()) {
        if (std::min(du, dd) == kInf) break;
        // Distances only grow from here in this direction; stop once both exceed.
        const double next_u = up <= hi ? std::abs(static_cast<double>(up) - c) : kInf;
        const double next_d = down >= lo ? std::abs(static_cast<double>(down) - c) : kInf;
        const double nearest = std::min(next_u, next_d);
        if (partial + nearest * nearest / dist.diag(i) >= list.bound()) break;
        continue;
      }
      cur(i) = v;
      if (i + 1 == n) {
        list.offer(cur, partial + inc);
      } else {
        self(self, i + 1, partial + inc);
      }
    }
  };
  descend(descend, 0, 0.0);

  const auto& items = list.items();
  r.best = items.front().first;
  r.cost_best = items.front().second;
  if (items.size() > 1) {
    r.second_best = items[1].first;
    r.cost_second = items[1].second;
  } else {
    r.second_best = r.best;
    r.cost_second = r.cost_best;
    r.degenerate = true;
  }
  r.evaluated = items;
  finish_result(r);
  return r;
}

void ConstraintContext::validate() const {
  if (!meas::is_rotation(dcm_eci_to_sensor, 1e-12 * 100)) {
    throw FrameError("constraint DCM is not a proper rotation");
  }
  if ((range_enabled && !(sigma_range > 0.0)) ||
      (azimuth_enabled && !(sigma_azimuth > 0.0)) ||
      (elevation_enabled && !(sigma_elevation > 0.0))) {
    throw Error("enabled constraint sensors need strictly positive sigmas");
  }
}

Vec3 candidate_baseline(const ConstraintContext& ctx, const IntVec& candidate) {
  return BaselineSolver(ctx).solve(candidate);
}

double penalty_cost(const ConstraintContext& ctx, const ComputedObservables& computed) {
  double cost = 0.0;
  const double weight_range = ctx.range_enabled ? ctx.range : ctx.estimated_range;
  if (ctx.azimuth_enabled) {
    const double d = wrap_angle(ctx.azimuth - computed.azimuth);
    cost += d * d / (weight_range * ctx.sigma_azimuth * ctx.sigma_azimuth);
  }
  if (ctx.elevation_enabled) {
    const double d = wrap_angle(ctx.elevation - computed.elevation);
    cost += d * d / (weight_range * ctx.sigma_elevation * ctx.sigma_elevation);
  }
  if (ctx.range_enabled) {
    const double d = ctx.range - computed.range;
    cost += d * d / (ctx.sigma_range * ctx.sigma_range);
  }
  return cost;
}

IntegerSearchResult constrained_search(const AmbiguityDistribution& dist,
                                       const ConstraintContext& ctx, int step) {
  if (step < 1) throw Error("constrained_search: initial step must be >= 1");
  const int n = dist.size();
  const bool use_sensors = ctx.any_enabled();
  std::optional<BaselineSolver> solver;
  if (use_sensors) {
    ctx.validate();
    solver.emplace(ctx);
  }
  auto cost = [&](const IntVec& nz) {
    double c = quadratic_cost(dist, nz);
    if (use_sensors) c += external_cost(ctx, *solver, assemble_full(ctx, dist.to_original(nz)));
    return c;
  };

  IntegerSearchResult r;
  IntVec best = bootstrap(dist);
  double c_best = cost(best);
  r.cost_init = c_best;
  CandidateList list(static_cast<std::size_t>(2 * n + 2));
  list.offer(best, c_best);

  int k = step;
  while (k > 0 && n > 0) {
    bool improved = false;
    for (int i = 0; i < n; ++i) {
      const IntVec base = best;
      IntVec step_best;
      double step_cost = kInf;
      for (const int s : {-k, k}) {
        IntVec cand = base;
        cand(i) += s;
        const double c = cost(cand);
        list.offer(cand, c);
        if (c < step_cost) {
          step_cost = c;
          step_best = cand;
        }
      }
      if (step_cost < c_best) {
        best = step_best;
        c_best = step_cost;
        improved = true;
      }
    }
    if (!improved) --k;
  }

  r.best = best;
  r.cost_best = c_best;
  r.evaluated = list.items();
  // Runner-up: lowest-cost evaluated candidate other than the best.
  r.degenerate = true;
  for (const auto& [v, c] : r.evaluated) {
    if (v != best) {
      r.second_best = v;
      r.cost_second = c;
      r.degenerate = false;
      break;
    }
  }
  if (r.degenerate) {
    r.second_best = best;
    r.cost_second = c_best;
  }
  finish_result(r);
  return r;
}

double success_rate(const VecX& diag, int subset_size, double s_coefficient, double gamma) {
  if (subset_size < 0 || subset_size > diag.size()) {
    throw Error("success_rate: subset size out of range");
  }
  const double sg = s_coefficient > 0.0 ? std::pow(s_coefficient, gamma) : (gamma == 0.0 ? 1.0 : 0.0);
  double p = 1.0;
  for (int i = 0; i < subset_size; ++i) {
    const double d = diag(i);
    if (d == 0.0) continue;
    p *= std::sqrt(1.0 - std::exp(-sg / (8.0 * d * d)));
  }
  return p;
}

bool discrimination_test(double cost_best, double cost_second, double kappa_d) {
  if (cost_best == 0.0) return cost_second > 0.0;
  return cost_second / cost_best > kappa_d;
}

PartialFix partial_resolve(const AmbiguityDistribution& dist,
                           const IntegerSearchResult& result, double kappa_p,
                           double kappa_d, GammaRule gamma_rule) {
  const int n = dist.size();
  PartialFix out;
  out.fixed_values = IntVec(0);
  if (n == 0) return out;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dist.diag(a) < dist.diag(b); });
  VecX sorted(n);
  // Conditional standard deviations enter the closed-form rate.
  for (int i = 0; i < n; ++i) sorted(i) = std::sqrt(dist.diag(order[i]));

  double s = result.cost_init > 0.0 ? result.cost_best / result.cost_init : 1.0;
  if (!(s <= 1.0)) s = 1.0;
  s = std::max(s, 1e-300);

  // Runner-up pool for the per-prefix discrimination test.
  std::vector<std::pair<IntVec, double>> pool = result.evaluated;
  pool.emplace_back(result.second_best, result.cost_second);

  int accepted = 0;
  for (int m = 1; m <= n; ++m) {
    const double p = success_rate(sorted, m, s, gamma_rule.gamma(m));
    double contender = kInf;
    for (const auto& [v, c] : pool) {
      bool differs = false;
      for (int i = 0; i < m && !differs; ++i) differs = v(order[i]) != result.best(order[i]);
      if (differs) contender = std::min(contender, c);
    }
    const bool disc = contender == kInf || discrimination_test(result.cost_best, contender, kappa_d);
    out.last_success_prob = p;
    if (p > kappa_p && disc) {
      accepted = m;
      out.success_prob = p;
    } else {
      break;
    }
  }
  out.fixed_indices.assign(order.begin(), order.begin() + accepted);
  out.fixed_values = IntVec(accepted);
  for (int i = 0; i < accepted; ++i) out.fixed_values(i) = result.best(order[i]);
  return out;
}

}  // namespace cdgps::iar
