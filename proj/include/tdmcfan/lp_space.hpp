#pragma once

// The state space of tagged point configurations on M = {(x,v): v > -a x},
// with the boundary-absorbing Wasserstein-1 style metric: ground distance
// d_p(X,Y) = |X-Y|^p ^ (d^p(X,dM) + d^p(Y,dM)) within a generation, the sum
// of boundary distances across generations, and optimal matching against a
// distinguished boundary point Delta for unequal masses.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tdmcfan::lp {

struct TaggedPoint {
  double x = 0.0;
  double v = 0.0;
  std::uint32_t generation = 0;
  bool is_delta = false;

  static TaggedPoint delta() {
    TaggedPoint p;
    p.is_delta = true;
    return p;
  }
  static TaggedPoint at(double x, double v, std::uint32_t gen = 0) {
    return TaggedPoint{x, v, gen, false};
  }
};

struct PointMeasure {
  std::vector<TaggedPoint> points;
  double a = 1.0;   // barrier slope
  double p = 0.5;   // exponent in (0,1]

  std::size_t count() const { return points.size(); }
};

// Two conventions for the distance to the barrier v = -a x: the Euclidean
// point-to-line distance (default) and the barrier-coordinate form |x + v/a|
// used in some scaling arguments; they differ by a constant factor only.
enum class BoundaryForm { euclidean, barrier_coordinate };

double dist_to_boundary(const TaggedPoint& X, double a,
                        BoundaryForm form = BoundaryForm::euclidean);

// Euclidean projection of X onto the barrier (barrier-coordinate form moves
// along x at fixed v).
TaggedPoint boundary_projection(const TaggedPoint& X, double a,
                                BoundaryForm form = BoundaryForm::euclidean);

double dp(const TaggedPoint& X, const TaggedPoint& Y, double p, double a,
          BoundaryForm form = BoundaryForm::euclidean);

// ||mu||_p = sum of d^p(X, dM); equals lp_distance(mu, empty).
double lp_norm(const PointMeasure& mu, BoundaryForm form = BoundaryForm::euclidean);

struct Matching {
  // Pairs of indices into the Delta-padded point lists (delta-padded side
  // index >= original count means Delta).
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double cost = 0.0;
};

double lp_distance(const PointMeasure& mu, const PointMeasure& nu, double p, double a,
                   BoundaryForm form = BoundaryForm::euclidean);

Matching optimal_matching(const PointMeasure& mu, const PointMeasure& nu, double p,
                          double a, BoundaryForm form = BoundaryForm::euclidean);

// Interpolation along the optimal matching; only same-generation pairs are
// connected directly, everything else moves through its boundary projection.
PointMeasure interpolate(const PointMeasure& mu, const PointMeasure& nu, double t,
                         double p, double a,
                         BoundaryForm form = BoundaryForm::euclidean);

// CSV rows "x,v,n"
void write_csv(std::ostream& os, const PointMeasure& mu);
PointMeasure read_csv(std::istream& is, double a, double p);

// Exact O(n^3) assignment on an arbitrary square cost matrix (row-major);
// returns per-row assigned column.
std::vector<std::size_t> solve_assignment(const std::vector<double>& cost,
                                          std::size_t n);

}  // namespace tdmcfan::lp
