#include "support/oracles.hpp"

#include "wbc/ot/barycenter.hpp"
#include "wbc/ot/kernels.hpp"
#include "wbc/ot/sinkhorn.hpp"

#include <doctest.h>

#include <omp.h>

#include <cstring>

using namespace wbc;
using namespace wbc::ot;

namespace {

template <class A, class B>
bool bitwise_equal(const A& a, const B& b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("parallel kernels agree with the serial reference bit for bit") {
  std::mt19937_64 rng(1);
  // Large enough to cross the parallel threshold.
  const Matrix x = oracle::random_points(300, 4, rng), y = oracle::random_points(200, 4, rng);
  const Vector h = oracle::random_points(200, 1, rng).col(0);

  for (int threads : {1, 2, 3, 8}) {
    omp_set_num_threads(threads);
    for (int p : {1, 2}) {
      Matrix cs(x.rows(), y.rows()), cp(x.rows(), y.rows());
      kernels::serial::pairwise_cost(x, y, 2, 0.8, p, cs);
      kernels::omp::pairwise_cost(x, y, 2, 0.8, p, cp);
      CHECK(bitwise_equal(cs, cp));
    }
    Matrix m(x.rows(), y.rows());
    kernels::serial::pairwise_cost(x, y, 2, 0.8, 2, m);
    m = -m / 0.01;
    Vector ls(m.rows()), lp(m.rows()), vs(m.rows()), vp(m.rows());
    kernels::serial::row_logsumexp(m, {h.data(), static_cast<std::size_t>(h.size())},
                                   {ls.data(), static_cast<std::size_t>(ls.size())});
    kernels::omp::row_logsumexp(m, {h.data(), static_cast<std::size_t>(h.size())},
                                {lp.data(), static_cast<std::size_t>(lp.size())});
    CHECK(bitwise_equal(ls, lp));
    kernels::serial::matvec(m, {h.data(), static_cast<std::size_t>(h.size())},
                            {vs.data(), static_cast<std::size_t>(vs.size())});
    kernels::omp::matvec(m, {h.data(), static_cast<std::size_t>(h.size())},
                         {vp.data(), static_cast<std::size_t>(vp.size())});
    CHECK(bitwise_equal(vs, vp));
  }
  omp_set_num_threads(kernels::max_threads());
}

TEST_CASE("serial kernels match a direct evaluation") {
  std::mt19937_64 rng(2);
  const Matrix x = oracle::random_points(7, 4, rng), y = oracle::random_points(5, 4, rng);
  Matrix c(7, 5);
  kernels::serial::pairwise_cost(x, y, 2, 0.8, 2, c);
  CHECK((c - oracle::costs(x, y, 0.8, 2)).cwiseAbs().maxCoeff() < 1e-14);

  const Vector h = Vector::LinSpaced(5, -1.0, 1.0);
  Vector out(7);
  kernels::serial::row_logsumexp(c, {h.data(), 5}, {out.data(), 7});
  for (Eigen::Index i = 0; i < 7; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < 5; ++j) s += std::exp(c(i, j) + h[j]);
    CHECK(out[i] == doctest::Approx(std::log(s)).epsilon(1e-14));
  }
}

TEST_CASE("solvers give identical results on both execution paths") {
  std::mt19937_64 rng(3);
  const DiscreteMeasure a(oracle::random_points(150, 4, rng), oracle::random_simplex(150, rng));
  const DiscreteMeasure b(oracle::random_points(140, 4, rng), oracle::random_simplex(140, rng));
  SinkhornConfig cfg;
  cfg.epsilon = 0.02;
  cfg.exec = kernels::Exec::serial;
  const auto rs = sinkhorn_ot(a, b, cfg, 0.8);
  cfg.exec = kernels::Exec::parallel;
  const auto rp = sinkhorn_ot(a, b, cfg, 0.8);
  CHECK(rs.cost == rp.cost);
  CHECK(rs.iterations == rp.iterations);
  CHECK(bitwise_equal(rs.plan.gamma, rp.plan.gamma));

  const std::vector<DiscreteMeasure> in{a, b};
  const Matrix sup = pooled_support(in);
  cfg.exec = kernels::Exec::serial;
  const auto bs = sinkhorn_barycenter(in, sup, cfg, 0.8);
  cfg.exec = kernels::Exec::parallel;
  const auto bp = sinkhorn_barycenter(in, sup, cfg, 0.8);
  CHECK(bitwise_equal(bs.measure.weights(), bp.measure.weights()));
}
