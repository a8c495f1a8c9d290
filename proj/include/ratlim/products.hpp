#pragma once

#include "ratlim/kernels.hpp"
#include "ratlim/walks.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ratlim {

enum class ProductKind { direct, cartesian };

// Direct product P1 (x) P2, or Cartesian s P1 (x) I + (1-s) I (x) P2.
struct ProductWalk {
  WalkSpec first;
  WalkSpec second;
  ProductKind kind = ProductKind::direct;
  Rational s = Rational(1, 2);  // cartesian weight of the first factor
  std::string label;

  static ProductWalk direct_product(WalkSpec a, WalkSpec b);
  static ProductWalk cartesian_product(WalkSpec a, WalkSpec b, Rational s);
  std::string describe() const;
};

// t3xZ: Cartesian (s = 1/2) of t3-lazy-iso and z-lazy. t3xt3: direct square of t3-lazy-iso.
std::optional<ProductWalk> preset_product(const std::string& name);

using ProductElement = std::pair<Word, Word>;
// "x1|x2", e.g. "1,2|-1" or "e|3".
ProductElement parse_product_element(const ProductWalk& pw, const std::string& text);
std::string product_element_str(const ProductElement& x);

using Coordinate = std::variant<Word, EndPrefix>;

struct ProductPoint {
  Coordinate first;
  Coordinate second;
  bool is_boundary() const;
  std::string str() const;
};

// Exact law of the product chain after n steps, by convolution on the product space.
template <class Scalar>
std::map<ProductElement, Scalar> product_distribution(const ProductWalk& pw, int n);

// p^(n)(e, y1 y2) for n = 0..n_max from the factor series (product or binomial mixture).
template <class Scalar>
std::vector<Scalar> product_series(const ProductWalk& pw, const ProductElement& y, int n_max,
                                   const NStepOptions& options = {});

// Product of the factor ratio kernels.
class ProductKernel {
 public:
  explicit ProductKernel(const ProductWalk& pw);
  KernelValue value(const ProductElement& x, const ProductPoint& y) const;
  Real value(const ProductElement& x, const ProductElement& y) const;
  const RatioKernel& first() const { return *first_; }
  const RatioKernel& second() const { return *second_; }

 private:
  std::shared_ptr<RatioKernel> first_, second_;
};

KernelValue product_ratio_kernel(const ProductKernel& kernel, const ProductElement& x, const ProductPoint& y);

struct CartesianAsymptotics {
  Real rho = 0;
  Real alpha = 0;
  Real C = 0;
  Real theta = 0;
};

CartesianAsymptotics cartesian_asymptotics(const ProductWalk& pw, Real rho1, Real alpha1, Real rho2, Real alpha2);

// Groups candidates whose product-kernel values agree on every probe within tol (relative).
struct Identification {
  std::vector<std::vector<int>> classes;
  Real tol = 0;
};

Identification identify_equivalent_boundary(const ProductKernel& kernel, const std::vector<ProductPoint>& candidates,
                                            const std::vector<ProductElement>& probes, Real tol = 1e-7L);

nlohmann::json product_report(const ProductWalk& pw, const CartesianAsymptotics& combined,
                              const std::vector<ProductPoint>& candidates, const Identification& classes);

}  // namespace ratlim
