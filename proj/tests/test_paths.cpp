#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "ctrl_duality/bsde.hpp"
#include "ctrl_duality/errors.hpp"
#include "ctrl_duality/paths.hpp"
#include "ctrl_duality/payoffs.hpp"
#include "ctrl_duality/stats.hpp"

using namespace ctrl_duality;

namespace {

Eigen::MatrixXd corr2(double rho) {
  Eigen::MatrixXd c(2, 2);
  c << 1.0, rho, rho, 1.0;
  return c;
}

double sample_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) ma += a[k], mb += b[k];
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

UvmSpec one_asset() {
  UvmSpec u;
  u.payoff = payoffs::linear();
  return u;
}

}  // namespace

TEST_CASE("increments have zero mean") {
  const auto batch = sample_noise(make_time_grid(1.0, 4), 1, Eigen::MatrixXd::Identity(1, 1), 1 << 15, 17);
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> v(batch.paths());
    for (std::size_t p = 0; p < batch.paths(); ++p) v[p] = batch.dw(p, i)[0];
    const auto s = sample_stats(v);
    CHECK(std::abs(s.mean) < 4.0 * s.std_error);
    CHECK(s.std_error * std::sqrt(static_cast<double>(v.size())) == doctest::Approx(0.5).epsilon(0.02));
  }
}

TEST_CASE("correlated increments") {
  const auto batch = sample_noise(make_time_grid(1.0, 2), 2, corr2(-0.5), 1 << 15, 5);
  std::vector<double> a(batch.paths()), b(batch.paths());
  for (std::size_t p = 0; p < batch.paths(); ++p) {
    a[p] = batch.dw(p, 1)[0];
    b[p] = batch.dw(p, 1)[1];
  }
  const double r = sample_correlation(a, b);
  CHECK(r > -0.56);
  CHECK(r < -0.44);

  // dw = L dz with the stored factor.
  const auto L = batch.factor();
  for (std::size_t p = 0; p < 10; ++p) {
    const auto z = batch.dz(p, 0);
    const auto w = batch.dw(p, 0);
    CHECK(w[0] == doctest::Approx(L[0] * z[0]));
    CHECK(w[1] == doctest::Approx(L[2] * z[0] + L[3] * z[1]));
  }
}

TEST_CASE("batches are deterministic in the seed") {
  const auto g = make_time_grid(1.0, 3);
  const auto a = sample_noise(g, 2, corr2(0.3), 100, 1);
  const auto b = sample_noise(g, 2, corr2(0.3), 100, 1, Execution::serial);
  const auto c = sample_noise(g, 2, corr2(0.3), 100, 2);
  bool differs = false;
  for (std::size_t p = 0; p < 100; ++p) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK(a.dw(p, i)[j] == b.dw(p, i)[j]);
        differs = differs || a.dw(p, i)[j] != c.dw(p, i)[j];
      }
    }
  }
  CHECK(differs);
  // path p does not depend on the batch size
  const auto small = sample_noise(g, 2, corr2(0.3), 10, 1);
  CHECK(small.dw(9, 2)[1] == a.dw(9, 2)[1]);
}

TEST_CASE("non-PSD correlation is rejected with its eigenvalue") {
  Eigen::MatrixXd c(3, 3);
  c << 1, -0.9, -0.9, -0.9, 1, -0.9, -0.9, -0.9, 1;
  CHECK_THROWS_WITH_AS(sample_noise(make_time_grid(1.0, 1), 3, c, 4, 1),
                       doctest::Contains("smallest eigenvalue -0.8"), ConfigError);
}

TEST_CASE("reference diffusion formula") {
  UvmSpec u = one_asset();
  u.sigma_lo = {0.0};
  u.sigma_hat = {0.0};
  const auto g = make_time_grid(1.0, 4);
  const auto batch = sample_noise(g, 1, Eigen::MatrixXd::Identity(1, 1), 50, 3);
  const std::vector<double> zero{0.0};
  const auto flat = evolve_reference(u.model(), zero, batch);
  for (std::size_t p = 0; p < 50; ++p) {
    for (std::size_t i = 0; i <= 4; ++i) CHECK(flat.at(p, i)[0] == 100.0);
  }
  // W_1 = 0 gives 100 exp(-0.15^2/2)
  CHECK(100.0 * std::exp(-0.15 * 0.15 / 2.0) == doctest::Approx(98.8813).epsilon(1e-6));
}

TEST_CASE("reference diffusion is a martingale") {
  const UvmSpec u = one_asset();
  const auto batch = sample_noise(make_time_grid(1.0, 4), 1, Eigen::MatrixXd::Identity(1, 1), 1 << 15, 8);
  const auto paths = evolve_reference(u.model(), u.sigma_hat, batch);
  std::vector<double> xt(batch.paths());
  for (std::size_t p = 0; p < batch.paths(); ++p) xt[p] = paths.at(p, 4)[0];
  const auto s = sample_stats(xt);
  CHECK(std::abs(s.mean - 100.0) < 4.0 * s.std_error);
}

TEST_CASE("constant reference control reproduces the reference diffusion") {
  UvmSpec u;
  u.assets = 2;
  u.x0 = {100.0, 90.0};
  u.sigma_lo = {0.1, 0.1};
  u.sigma_hi = {0.2, 0.3};
  u.sigma_hat = {0.15, 0.25};
  u.rho_lo = -0.5;
  u.rho_hi = 0.5;
  u.rho_hat = -0.3;
  u.payoff = payoffs::outperformer();
  const auto g = make_time_grid(1.0, 6);
  const auto batch = sample_noise(g, 2, u.reference_correlation(), 64, 21);
  const auto model = u.model();
  const auto ref = evolve_reference(model, u.sigma_hat, batch);
  const std::vector<double> a{0.15, 0.25, -0.3};
  const ControlPath path(6, a);
  for (std::size_t p = 0; p < 64; ++p) {
    const auto x = evolve_controlled(model, path, batch, p);
    for (std::size_t i = 0; i <= 6; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK(x.at(i)[j] == doctest::Approx(ref.at(p, i)[j]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("zero volatility freezes the state") {
  UvmSpec u = one_asset();
  u.sigma_lo = {0.0};
  const auto batch = sample_noise(make_time_grid(1.0, 3), 1, Eigen::MatrixXd::Identity(1, 1), 4, 2);
  const std::vector<double> a{0.0};
  const auto x = evolve_controlled(u.model(), ControlPath(3, a), batch, 1);
  for (std::size_t i = 0; i <= 3; ++i) CHECK(x.at(i)[0] == 100.0);
}

TEST_CASE("per-step correlation follows the control") {
  UvmSpec u;
  u.assets = 2;
  u.x0 = {100.0, 100.0};
  u.sigma_lo = u.sigma_hi = u.sigma_hat = {0.2, 0.2};
  u.rho_lo = -0.8;
  u.rho_hi = 0.8;
  u.payoff = payoffs::outperformer();
  const auto model = u.model();
  const auto g = make_time_grid(1.0, 2);
  const auto batch = sample_noise(g, 2, u.reference_correlation(), 1 << 15, 4);
  ControlPath a(2, 3);
  a.at(0)[0] = a.at(0)[1] = a.at(1)[0] = a.at(1)[1] = 0.2;
  a.at(0)[2] = 0.6;
  a.at(1)[2] = -0.6;
  std::vector<double> r0a, r0b, r1a, r1b;
  StatePath out;
  EvolveScratch scratch;
  for (std::size_t p = 0; p < batch.paths(); ++p) {
    evolve_controlled(model, a, batch, p, out, scratch);
    r0a.push_back(std::log(out.at(1)[0] / out.at(0)[0]));
    r0b.push_back(std::log(out.at(1)[1] / out.at(0)[1]));
    r1a.push_back(std::log(out.at(2)[0] / out.at(1)[0]));
    r1b.push_back(std::log(out.at(2)[1] / out.at(1)[1]));
  }
  CHECK(sample_correlation(r0a, r0b) == doctest::Approx(0.6).epsilon(0.04 / 0.6));
  CHECK(sample_correlation(r1a, r1b) == doctest::Approx(-0.6).epsilon(0.04 / 0.6));
}

TEST_CASE("controls outside the box are a contract violation") {
  const UvmSpec u = one_asset();
  const auto batch = sample_noise(make_time_grid(1.0, 2), 1, Eigen::MatrixXd::Identity(1, 1), 2, 2);
  const std::vector<double> a{0.3};
  CHECK_THROWS_AS(evolve_controlled(u.model(), ControlPath(2, a), batch, 0), std::domain_error);
}

TEST_CASE("euler dynamics and discount factors") {
  ModelSpec m;
  m.dim = 1;
  m.factors = 1;
  m.x0 = {0.0};
  m.box = ControlBox({{0.0, 1.0}});
  m.drift = [](double, std::span<const double> a, std::span<const double>, std::span<double> out) { out[0] = a[0]; };
  m.vol = [](double, std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = 2.0; };
  m.payoff.terminal = [](std::span<const double> x) { return x[0]; };
  const auto g = make_time_grid(1.0, 4);
  const auto batch = sample_noise(g, 1, Eigen::MatrixXd::Identity(1, 1), 3, 6);
  const std::vector<double> half{0.5};
  const ControlPath a(4, half);
  const auto x = evolve_controlled(m, a, batch, 2);
  double expect = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    expect += 0.5 * 0.25 + 2.0 * batch.dw(2, i)[0];
    CHECK(x.at(i + 1)[0] == doctest::Approx(expect).epsilon(1e-14));
  }

  auto r = discount_factors(m, a, x, g);
  for (double v : r) CHECK(v == 1.0);
  m.rate = [](double, std::span<const double> c, std::span<const double>) { return c[0]; };
  const std::vector<double> tenth{0.1};
  r = discount_factors(m, ControlPath(4, tenth), x, g);
  CHECK(r[0] == 1.0);
  CHECK(r[4] == doctest::Approx(std::exp(-0.1)).epsilon(1e-14));

  ControlPath varying(4, 1);
  const double rates[] = {0.3, 0.0, 1.0, 0.2};
  for (std::size_t i = 0; i < 4; ++i) varying.at(i)[0] = rates[i];
  r = discount_factors(m, varying, x, g);
  CHECK(r[4] == doctest::Approx(std::exp(-(0.3 + 0.0 + 1.0 + 0.2) * 0.25)).epsilon(1e-14));
}

TEST_CASE("controlled martingale check") {
  const UvmSpec u = one_asset();
  const auto model = u.model();
  const auto batch = sample_noise(make_time_grid(1.0, 4), 1, Eigen::MatrixXd::Identity(1, 1), 1 << 14, 12);
  ControlPath a(4, 1);
  const double s[] = {0.1, 0.2, 0.13, 0.2};
  for (std::size_t i = 0; i < 4; ++i) a.at(i)[0] = s[i];
  std::vector<double> v(batch.paths());
  StatePath out;
  EvolveScratch scratch;
  for (std::size_t p = 0; p < batch.paths(); ++p) {
    evolve_controlled(model, a, batch, p, out, scratch);
    v[p] = out.terminal()[0];
  }
  const auto st = sample_stats(v);
  CHECK(std::abs(st.mean - 100.0) < 4.0 * st.std_error);
}

TEST_CASE("payoff cap") {
  ModelSpec m;
  m.payoff.terminal = [](std::span<const double> x) { return x[0]; };
  m.cap = 5.0;
  const std::vector<double> big{12.0}, small{-9.0}, mid{1.5};
  CHECK(m.terminal_payoff(big) == 5.0);
  CHECK(m.terminal_payoff(small) == -5.0);
  CHECK(m.terminal_payoff(mid) == 1.5);
}

TEST_CASE("path dump columns") {
  const UvmSpec u = one_asset();
  const auto g = make_time_grid(1.0, 2);
  const auto batch = sample_noise(g, 1, Eigen::MatrixXd::Identity(1, 1), 2, 2);
  const auto paths = evolve_reference(u.model(), u.sigma_hat, batch);
  std::ostringstream os;
  write_paths_csv(os, paths, g);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "path,time,asset,value");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 2 * 3);
}
