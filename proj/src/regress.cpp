#include "ctrl_duality/regress.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "ctrl_duality/errors.hpp"

namespace ctrl_duality {

BasisSpec::BasisSpec(std::size_t dim, std::vector<Exponents> terms, std::vector<double> scale)
    : dim_(dim), terms_(std::move(terms)), scale_(std::move(scale)) {
  if (dim_ == 0) throw ConfigError("basis: dimension must be at least 1");
  if (terms_.empty()) throw ConfigError("basis: needs at least one term");
  if (scale_.empty()) scale_.assign(dim_, 1.0);
  if (scale_.size() == 1 && dim_ > 1) scale_.assign(dim_, scale_[0]);
  if (scale_.size() != dim_) throw ConfigError("basis: scale must have one entry per coordinate");
  for (double s : scale_) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("basis: scale entries must be positive");
  }
  bool has_constant = false;
  for (const auto& t : terms_) {
    if (t.size() != dim_) throw ConfigError("basis: term has the wrong number of exponents");
    has_constant = has_constant || std::all_of(t.begin(), t.end(), [](unsigned e) { return e == 0; });
    for (unsigned e : t) max_power_ = std::max(max_power_, e);
  }
  if (!has_constant) throw ConfigError("basis: must include the constant function");
}

BasisSpec BasisSpec::full(std::size_t dim, unsigned degree, std::vector<double> scale) {
  std::vector<Exponents> terms;
  Exponents e(dim, 0);
  // All exponent vectors with sum g, first coordinate varying slowest from
  // high to low, so 2-D degree 2 is x1^2, x1 x2, x2^2.
  auto emit = [&](auto&& self, std::size_t j, unsigned left) -> void {
    if (j + 1 == dim) {
      e[j] = left;
      terms.push_back(e);
      return;
    }
    for (unsigned v = left + 1; v-- > 0;) {
      e[j] = v;
      self(self, j + 1, left - v);
    }
  };
  for (unsigned g = 0; g <= degree; ++g) emit(emit, 0, g);
  return BasisSpec(dim, std::move(terms), std::move(scale));
}

BasisSpec BasisSpec::quadratic2d(std::vector<double> scale) {
  return BasisSpec(2, {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {0, 2}, {1, 1}}, std::move(scale));
}

void BasisSpec::eval(std::span<const double> x, std::span<double> features) const {
  // Powers table: pow[j * (max_power_ + 1) + e] = (x_j / scale_j)^e.
  constexpr std::size_t kStack = 64;
  const std::size_t width = max_power_ + 1;
  double stack[kStack];
  std::vector<double> heap;
  double* pow = stack;
  if (dim_ * width > kStack) {
    heap.resize(dim_ * width);
    pow = heap.data();
  }
  for (std::size_t j = 0; j < dim_; ++j) {
    const double y = x[j] / scale_[j];
    double* row = pow + j * width;
    row[0] = 1.0;
    for (std::size_t e = 1; e < width; ++e) row[e] = row[e - 1] * y;
  }
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    double v = 1.0;
    for (std::size_t j = 0; j < dim_; ++j) v *= pow[j * width + terms_[t][j]];
    features[t] = v;
  }
}

std::vector<double> BasisSpec::eval(std::span<const double> x) const {
  std::vector<double> out(size());
  eval(x, out);
  return out;
}

RegressedFn::RegressedFn(BasisSpec basis, std::vector<double> coefficients, double ridge,
                         std::size_t samples, double condition)
    : basis_(std::move(basis)), coef_(std::move(coefficients)), ridge_(ridge), samples_(samples),
      condition_(condition) {
  if (coef_.size() != basis_.size()) {
    throw std::invalid_argument("regressed function: coefficient count does not match the basis");
  }
  for (double c : coef_) {
    if (!std::isfinite(c)) throw NumericalError("regressed function: non-finite coefficient");
  }
}

RegressedFn RegressedFn::constant(std::size_t dim, double value, std::size_t samples) {
  return RegressedFn(BasisSpec::full(dim, 0, {}), {value}, 0.0, samples, 1.0);
}

double RegressedFn::operator()(std::span<const double> x) const {
  constexpr std::size_t kStack = 64;
  if (coef_.size() <= kStack) {
    double features[kStack];
    return eval(*this, x, {features, coef_.size()});
  }
  std::vector<double> features(coef_.size());
  return eval(*this, x, features);
}

double eval(const RegressedFn& fn, std::span<const double> x, std::span<double> features) {
  fn.basis().eval(x, features);
  double v = 0.0;
  const auto coef = fn.coefficients();
  for (std::size_t t = 0; t < coef.size(); ++t) v += coef[t] * features[t];
  return v;
}

void RegressedFn::write(std::ostream& os) const {
  const auto old = os.precision(17);
  os << "regressed_fn 1\n";
  os << "dim " << basis_.dim() << '\n';
  os << "scale";
  for (double s : basis_.scale()) os << ' ' << s;
  os << '\n';
  os << "ridge " << ridge_ << '\n';
  os << "samples " << samples_ << '\n';
  os << "condition " << condition_ << '\n';
  os << "terms " << basis_.size() << '\n';
  for (std::size_t t = 0; t < basis_.size(); ++t) {
    for (unsigned e : basis_.terms()[t]) os << e << ' ';
    os << coef_[t] << '\n';
  }
  os.precision(old);
}

namespace {

void expect(std::istream& is, const std::string& key) {
  std::string word;
  if (!(is >> word) || word != key) {
    throw ConfigError("regressed function record: expected '" + key + "', got '" + word + "'");
  }
}

}  // namespace

RegressedFn RegressedFn::read(std::istream& is) {
  expect(is, "regressed_fn");
  int version = 0;
  if (!(is >> version) || version != 1) throw ConfigError("regressed function record: bad version");
  std::size_t dim = 0, samples = 0, count = 0;
  double ridge = 0.0, condition = 0.0;
  expect(is, "dim");
  is >> dim;
  expect(is, "scale");
  std::vector<double> scale(dim);
  for (auto& s : scale) is >> s;
  expect(is, "ridge");
  is >> ridge;
  expect(is, "samples");
  is >> samples;
  expect(is, "condition");
  is >> condition;
  expect(is, "terms");
  is >> count;
  std::vector<BasisSpec::Exponents> terms(count, BasisSpec::Exponents(dim));
  std::vector<double> coef(count);
  for (std::size_t t = 0; t < count; ++t) {
    for (auto& e : terms[t]) is >> e;
    is >> coef[t];
  }
  if (!is) throw ConfigError("regressed function record: truncated");
  return RegressedFn(BasisSpec(dim, std::move(terms), std::move(scale)), std::move(coef), ridge,
                     samples, condition);
}

std::vector<RegressedFn> fit_many(const BasisSpec& basis, std::span<const double> xs,
                                  std::span<const double> ys, std::size_t responses,
                                  const FitOptions& options) {
  const std::size_t d = basis.dim();
  const std::size_t k = basis.size();
  if (d == 0 || xs.size() % d != 0) throw std::invalid_argument("fit: state array shape");
  const std::size_t n = xs.size() / d;
  if (responses == 0 || ys.size() != n * responses) {
    throw std::invalid_argument("fit: response array shape");
  }
  if (n < k) {
    throw ConfigError("fit: " + std::to_string(n) + " samples for " + std::to_string(k) +
                      " basis functions");
  }

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(responses));
  std::vector<double> phi(k);
  for (std::size_t s = 0; s < n; ++s) {
    basis.eval(xs.subspan(s * d, d), phi);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b <= a; ++b) gram(a, b) += phi[a] * phi[b];
      for (std::size_t r = 0; r < responses; ++r) rhs(a, r) += phi[a] * ys[s * responses + r];
    }
  }
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < a; ++b) gram(b, a) = gram(a, b);
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double emax = eig.eigenvalues().maxCoeff();
  const double emin = eig.eigenvalues().minCoeff();
  const double condition =
      emin > 0.0 ? std::sqrt(emax / emin) : std::numeric_limits<double>::infinity();
  if (options.ridge == 0.0 && !(condition < 1e12)) {
    std::ostringstream msg;
    msg << "fit: design matrix is rank deficient (condition number " << condition
        << "); set a positive ridge";
    throw NumericalError(msg.str());
  }

  gram.diagonal().array() += options.ridge;
  Eigen::MatrixXd beta;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() == Eigen::Success) {
    beta = llt.solve(rhs);
  }
  if (llt.info() != Eigen::Success || !beta.allFinite()) {
    beta = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(gram).solve(rhs);
  }
  if (!beta.allFinite()) throw NumericalError("fit: non-finite coefficients");

  std::vector<RegressedFn> out;
  out.reserve(responses);
  for (std::size_t r = 0; r < responses; ++r) {
    std::vector<double> coef(k);
    for (std::size_t a = 0; a < k; ++a) coef[a] = beta(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(r));
    out.emplace_back(basis, std::move(coef), options.ridge, n, condition);
  }
  return out;
}

RegressedFn fit(const BasisSpec& basis, std::span<const double> xs, std::span<const double> ys,
                const FitOptions& options) {
  return std::move(fit_many(basis, xs, ys, 1, options).front());
}

}  // namespace ctrl_duality
