#pragma once

#include "hfd/kdtree.hpp"
#include "hfd/nodegen.hpp"
#include "hfd/types.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace hfd {

enum class Method { MON, RBFFD };

const char* to_string(Method m);

struct OperatorKind {
  enum class Type { Laplacian, Partial, NormalDerivative };
  Type type = Type::Laplacian;
  int axis = 0;
  Vec normal = Vec::Zero();

  static OperatorKind laplacian() { return {}; }
  static OperatorKind partial(int axis) { return {Type::Partial, axis, Vec::Zero()}; }
  static OperatorKind normal_derivative(const Vec& n) { return {Type::NormalDerivative, 0, n}; }
};

struct StencilSpec {
  Index center = 0;
  std::vector<Index> neighbors;  ///< by increasing distance; neighbors[0] == center
  Method method = Method::RBFFD;
};

struct WeightRow {
  std::vector<Index> neighbors;
  std::vector<std::vector<double>> weights;  ///< weights[op][k] pairs with neighbors[k]
  double kappa = kNaN;                        ///< condition number of the local system (NaN if not computed)
  Method method = Method::RBFFD;

  static constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
};

/// 2d+1 for MON; 2 * C(m+d, m) for RBF-FD with m = 2 in 2D (12), 30 in 3D.
int stencil_size(Method m, int dim);
/// Number of monomials of total degree <= 2 in dim dimensions.
int monomial_count(int dim);

/// MON iff the node is Regular and all 2d axis neighbours exist at the lattice spacing.
Method select_method(const NodeSet& nodes, const KdTree& tree, Index i);

/// n nearest nodes (center first), ties broken by ascending index.
StencilSpec find_stencil(const KdTree& tree, Index center, int n);

/// The node itself plus its n-1 nearest interior nodes (one-sided stencil for boundary rows).
StencilSpec find_boundary_stencil(const NodeSet& nodes, const KdTree& tree, Index center, int n);

/// Collocation on {1, x_a, x_a^2}: coordinates shifted to the center and scaled by h.
WeightRow mon_weights(const StencilSpec& stencil, std::span<const Vec> positions, int dim, double h,
                      std::span<const OperatorKind> ops, bool with_condition = true);

/// r^3 PHS augmented with monomials up to degree 2; coordinates shifted to the center and scaled
/// by the stencil radius. Solves the saddle-point system with full pivoting.
WeightRow rbf_fd_weights(const StencilSpec& stencil, std::span<const Vec> positions, int dim,
                         std::span<const OperatorKind> ops, bool with_condition = true);

/// sigma_max / sigma_min; +inf when singular.
double condition_number(const Eigen::Ref<const Eigen::MatrixXd>& m);

struct WeightOptions {
  bool condition = true;
};

/// Weights for the whole node set. Interior rows carry [Laplacian, d/dx_0 .. d/dx_{d-1}],
/// boundary rows carry [normal derivative] computed with RBF-FD on the nearest nodes.
struct WeightSet {
  std::vector<WeightRow> rows;
  int dim = 2;
  static constexpr std::size_t kLaplacian = 0;
  static std::size_t partial(int axis) { return 1 + static_cast<std::size_t>(axis); }
  static constexpr std::size_t kNormal = 0;
};

WeightSet compute_weights(const NodeSet& nodes, const KdTree& tree, const WeightOptions& options = {});

/// Per-node diagnostics CSV: position, method, stencil size, kappa.
void write_weights_csv(const NodeSet& nodes, const WeightSet& weights, const std::string& path);

}  // namespace hfd
