#include "tdmcfan/lp_space.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tdmcfan::lp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_pa(double p, double a) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("lp: p must be in (0,1]");
  if (!(a >= 0.0)) throw std::invalid_argument("lp: a must be >= 0");
}

void check_membership(const TaggedPoint& X, double a) {
  if (!X.is_delta && !(X.v > -a * X.x))
    throw std::invalid_argument("lp: point outside M (needs v > -a x)");
}

}  // namespace

double dist_to_boundary(const TaggedPoint& X, double a, BoundaryForm form) {
  if (X.is_delta) return 0.0;
  if (form == BoundaryForm::euclidean)
    return std::abs(X.v + a * X.x) / std::sqrt(1.0 + a * a);
  if (a == 0.0) return std::abs(X.v);
  return std::abs(X.x + X.v / a);
}

TaggedPoint boundary_projection(const TaggedPoint& X, double a, BoundaryForm form) {
  if (X.is_delta) return X;
  if (form == BoundaryForm::barrier_coordinate && a > 0.0)
    return TaggedPoint{-X.v / a, X.v, X.generation, false};
  double q = (X.v + a * X.x) / (1.0 + a * a);
  return TaggedPoint{X.x - a * q, X.v - q, X.generation, false};
}

double dp(const TaggedPoint& X, const TaggedPoint& Y, double p, double a,
          BoundaryForm form) {
  validate_pa(p, a);
  if (X.is_delta && Y.is_delta) return 0.0;
  double bx = std::pow(dist_to_boundary(X, a, form), p);
  if (Y.is_delta) return bx;
  double by = std::pow(dist_to_boundary(Y, a, form), p);
  if (X.is_delta) return by;
  if (X.generation != Y.generation) return bx + by;
  double dxy = std::hypot(X.x - Y.x, X.v - Y.v);
  return std::min(std::pow(dxy, p), bx + by);
}

double lp_norm(const PointMeasure& mu, BoundaryForm form) {
  validate_pa(mu.p, mu.a);
  double s = 0.0;
  for (const auto& X : mu.points) s += std::pow(dist_to_boundary(X, mu.a, form), mu.p);
  return s;
}

// Jonker-Volgenant style shortest augmenting path assignment.
std::vector<std::size_t> solve_assignment(const std::vector<double>& cost,
                                          std::size_t n) {
  if (cost.size() != n * n) throw std::invalid_argument("solve_assignment: bad size");
  if (n == 0) return {};
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> way(n + 1, 0), match(n + 1, n);  // match[col] = row
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    std::size_t j0 = n;  // virtual column holding the current row
    match[j0] = i;
    do {
      used[j0] = 1;
      std::size_t i0 = match[j0], j1 = n;
      double delta = kInf;
      for (std::size_t j = 0; j < n; ++j) {
        if (used[j]) continue;
        double cur = cost[i0 * n + j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != n);
    do {
      std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != n);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 0; j < n; ++j)
    if (match[j] < n) row_to_col[match[j]] = j;
  return row_to_col;
}

namespace {

struct Padded {
  std::vector<TaggedPoint> xs, ys;
  std::size_t n = 0;
};

Padded pad_measures(const PointMeasure& mu, const PointMeasure& nu) {
  Padded out;
  out.xs = mu.points;
  out.ys = nu.points;
  std::size_t n = std::max(out.xs.size(), out.ys.size());
  out.xs.resize(n, TaggedPoint::delta());
  out.ys.resize(n, TaggedPoint::delta());
  out.n = n;
  return out;
}

std::vector<double> cost_matrix(const Padded& pd, double p, double a,
                                BoundaryForm form) {
  std::vector<double> cost(pd.n * pd.n);
  for (std::size_t i = 0; i < pd.n; ++i)
    for (std::size_t j = 0; j < pd.n; ++j)
      cost[i * pd.n + j] = dp(pd.xs[i], pd.ys[j], p, a, form);
  return cost;
}

// Canonicalise ties: among equal-cost matchings prefer the lexicographically
// smallest sequence of column indices (rows already sorted).
void lexicographic_tiebreak(const std::vector<double>& cost, std::size_t n,
                            std::vector<std::size_t>& col_of_row) {
  if (n < 2) return;
  const double tol = 1e-12;
  bool changed = true;
  std::size_t guard = 0;
  while (changed && guard++ < n) {
    changed = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t k = i + 1; k < n; ++k) {
        std::size_t ji = col_of_row[i], jk = col_of_row[k];
        if (jk >= ji) continue;
        double cur = cost[i * n + ji] + cost[k * n + jk];
        double swp = cost[i * n + jk] + cost[k * n + ji];
        if (std::abs(cur - swp) <= tol * (1.0 + std::abs(cur))) {
          std::swap(col_of_row[i], col_of_row[k]);
          changed = true;
        }
      }
    }
  }
}

}  // namespace

Matching optimal_matching(const PointMeasure& mu, const PointMeasure& nu, double p,
                          double a, BoundaryForm form) {
  validate_pa(p, a);
  for (const auto& X : mu.points) check_membership(X, a);
  for (const auto& Y : nu.points) check_membership(Y, a);
  Padded pd = pad_measures(mu, nu);
  Matching m;
  if (pd.n == 0) return m;
  std::vector<double> cost = cost_matrix(pd, p, a, form);
  std::vector<std::size_t> col = solve_assignment(cost, pd.n);
  lexicographic_tiebreak(cost, pd.n, col);
  m.pairs.reserve(pd.n);
  for (std::size_t i = 0; i < pd.n; ++i) {
    m.pairs.emplace_back(i, col[i]);
    m.cost += cost[i * pd.n + col[i]];
  }
  return m;
}

double lp_distance(const PointMeasure& mu, const PointMeasure& nu, double p, double a,
                   BoundaryForm form) {
  return optimal_matching(mu, nu, p, a, form).cost;
}

PointMeasure interpolate(const PointMeasure& mu, const PointMeasure& nu, double t,
                         double p, double a, BoundaryForm form) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("interpolate: t must be in [0,1]");
  Matching m = optimal_matching(mu, nu, p, a, form);
  Padded pd = pad_measures(mu, nu);
  PointMeasure out;
  out.a = a;
  out.p = p;
  for (const auto& [i, j] : m.pairs) {
    const TaggedPoint& X = pd.xs[i];
    const TaggedPoint& Y = pd.ys[j];
    if (X.is_delta && Y.is_delta) continue;
    bool same_gen = !X.is_delta && !Y.is_delta && X.generation == Y.generation;
    // within a generation the min() in dp decides whether the pair is really
    // connected or both points are absorbed at the boundary
    bool direct = false;
    if (same_gen) {
      double dxy = std::pow(std::hypot(X.x - Y.x, X.v - Y.v), p);
      double via = std::pow(dist_to_boundary(X, a, form), p) +
                   std::pow(dist_to_boundary(Y, a, form), p);
      direct = dxy <= via;
    }
    if (direct) {
      TaggedPoint Z;
      Z.x = (1.0 - t) * X.x + t * Y.x;
      Z.v = (1.0 - t) * X.v + t * Y.v;
      Z.generation = X.generation;
      if (Z.v > -a * Z.x) out.points.push_back(Z);
      continue;
    }
    // X exits through its projection, Y enters from its own
    if (!X.is_delta) {
      TaggedPoint PX = boundary_projection(X, a, form);
      TaggedPoint Z;
      Z.x = (1.0 - t) * X.x + t * PX.x;
      Z.v = (1.0 - t) * X.v + t * PX.v;
      Z.generation = X.generation;
      if (Z.v > -a * Z.x) out.points.push_back(Z);
    }
    if (!Y.is_delta) {
      TaggedPoint PY = boundary_projection(Y, a, form);
      TaggedPoint Z;
      Z.x = t * Y.x + (1.0 - t) * PY.x;
      Z.v = t * Y.v + (1.0 - t) * PY.v;
      Z.generation = Y.generation;
      if (Z.v > -a * Z.x) out.points.push_back(Z);
    }
  }
  return out;
}

void write_csv(std::ostream& os, const PointMeasure& mu) {
  char buf[80];
  for (const auto& X : mu.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%u\n", X.x, X.v, X.generation);
    os << buf;
  }
}

PointMeasure read_csv(std::istream& is, double a, double p) {
  PointMeasure mu;
  mu.a = a;
  mu.p = p;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double x, v;
    unsigned n;
    if (!(ls >> x >> v >> n)) throw std::runtime_error("PointMeasure csv: bad row: " + line);
    mu.points.push_back(TaggedPoint::at(x, v, n));
  }
  return mu;
}

}  // namespace tdmcfan::lp
