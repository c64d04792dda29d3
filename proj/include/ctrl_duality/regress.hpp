#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace ctrl_duality {

/// Monomial basis on states normalized coordinate-wise by `scale`.
class BasisSpec {
 public:
  using Exponents = std::vector<unsigned>;

  BasisSpec() = default;
  BasisSpec(std::size_t dim, std::vector<Exponents> terms, std::vector<double> scale);

  /// All monomials of total degree <= degree, graded then lexicographic
  /// (1-D: 1, x, .., x^degree).
  static BasisSpec full(std::size_t dim, unsigned degree, std::vector<double> scale);
  /// {1, x1, x2, x1^2, x2^2, x1 x2}.
  static BasisSpec quadratic2d(std::vector<double> scale);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return terms_.size(); }
  const std::vector<Exponents>& terms() const { return terms_; }
  std::span<const double> scale() const { return scale_; }

  void eval(std::span<const double> x, std::span<double> features) const;
  std::vector<double> eval(std::span<const double> x) const;

  bool operator==(const BasisSpec&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<Exponents> terms_;
  std::vector<double> scale_;
  unsigned max_power_ = 0;
};

inline std::vector<double> eval_basis(const BasisSpec& spec, std::span<const double> x) {
  return spec.eval(x);
}

/// beta . phi(x) for a fitted basis expansion.
class RegressedFn {
 public:
  RegressedFn() = default;
  RegressedFn(BasisSpec basis, std::vector<double> coefficients, double ridge,
              std::size_t samples, double condition = 0.0);

  /// Constant function (used at t = 0 where all paths share one state).
  static RegressedFn constant(std::size_t dim, double value, std::size_t samples = 0);

  double operator()(std::span<const double> x) const;

  const BasisSpec& basis() const { return basis_; }
  std::span<const double> coefficients() const { return coef_; }
  double ridge() const { return ridge_; }
  std::size_t samples() const { return samples_; }
  /// 2-norm condition number of the normalized design matrix at fit time.
  double condition() const { return condition_; }

  void write(std::ostream& os) const;
  static RegressedFn read(std::istream& is);

 private:
  BasisSpec basis_;
  std::vector<double> coef_;
  double ridge_ = 0.0;
  std::size_t samples_ = 0;
  double condition_ = 0.0;
};

inline double eval(const RegressedFn& fn, std::span<const double> x) { return fn(x); }

/// Scratch-free evaluation with caller-provided feature storage.
double eval(const RegressedFn& fn, std::span<const double> x, std::span<double> features);

struct FitOptions {
  double ridge = 1e-8;
};

/// Least squares with ridge penalty on the normalized features:
/// minimizes sum (y - beta.phi(x))^2 + ridge |beta|^2. `xs` is row-major
/// (samples x dim). Throws NumericalError (with the condition number) when the
/// design is rank deficient and ridge is zero.
RegressedFn fit(const BasisSpec& basis, std::span<const double> xs, std::span<const double> ys,
                const FitOptions& options = {});

/// Fits several response columns on one design in a single factorization.
/// `ys` is row-major (samples x responses).
std::vector<RegressedFn> fit_many(const BasisSpec& basis, std::span<const double> xs,
                                  std::span<const double> ys, std::size_t responses,
                                  const FitOptions& options = {});

}  // namespace ctrl_duality
