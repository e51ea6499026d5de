#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "meshssm/error.hpp"
#include "meshssm/nd/kernels.hpp"
#include "meshssm/nd/random.hpp"

using namespace meshssm::nd;
using namespace meshssm::nd::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = 2 * rng.uniform() - 1;
  return v;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol * (1 + std::abs(a[i]))) << "at " << i;
}

class KernelEquivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!backend_available(Backend::avx2)) GTEST_SKIP() << "AVX2 backend not available";
  }
  const KernelTable& s = table(Backend::scalar);
  const KernelTable& v() { return table(Backend::avx2); }
};

// Sizes straddle the 4-wide vector width and the unrolled blocks.
const std::size_t kSizes[] = {1, 2, 3, 4, 5, 7, 8, 9, 13, 16, 31, 64, 67};

}  // namespace

TEST_F(KernelEquivalence, Gemm) {
  Rng rng(1);
  for (std::size_t n : {1, 3, 6, 17})
    for (std::size_t k : {1, 4, 9, 35})
      for (std::size_t m : {1, 3, 4, 8, 13, 66}) {
        auto a = random_vector(n * k, rng), b = random_vector(k * m, rng), bt = random_vector(m * k, rng);
        auto atn = random_vector(n * m, rng);
        auto c0 = random_vector(n * m, rng);
        auto c1 = c0;
        s.gemm_nn(a.data(), b.data(), c0.data(), n, k, m);
        v().gemm_nn(a.data(), b.data(), c1.data(), n, k, m);
        expect_close(c0, c1, 1e-13);
        c0.assign(n * m, 0.5);
        c1 = c0;
        s.gemm_nt(a.data(), bt.data(), c0.data(), n, k, m);
        v().gemm_nt(a.data(), bt.data(), c1.data(), n, k, m);
        expect_close(c0, c1, 1e-13);
        std::vector<double> d0(k * m, -0.25), d1 = d0;
        s.gemm_tn(a.data(), atn.data(), d0.data(), n, k, m);
        v().gemm_tn(a.data(), atn.data(), d1.data(), n, k, m);
        expect_close(d0, d1, 1e-13);
      }
}

TEST_F(KernelEquivalence, PairwiseSqdistThreeDimensionalIsBitIdentical) {
  Rng rng(2);
  for (std::size_t n : kSizes)
    for (std::size_t m : kSizes) {
      auto a = random_vector(n * 3, rng), b = random_vector(m * 3, rng);
      std::vector<double> o0(n * m), o1(n * m);
      s.pairwise_sqdist(a.data(), n, b.data(), m, 3, o0.data());
      v().pairwise_sqdist(a.data(), n, b.data(), m, 3, o1.data());
      EXPECT_EQ(o0, o1) << n << "x" << m;
    }
}

TEST_F(KernelEquivalence, PairwiseSqdistGeneralWidth) {
  Rng rng(3);
  for (std::size_t d : {1, 2, 4, 5, 8, 64, 67})
    for (std::size_t n : {1, 5, 9})
      for (std::size_t m : {1, 3, 4, 7, 13}) {
        auto a = random_vector(n * d, rng), b = random_vector(m * d, rng);
        std::vector<double> o0(n * m), o1(n * m);
        s.pairwise_sqdist(a.data(), n, b.data(), m, d, o0.data());
        v().pairwise_sqdist(a.data(), n, b.data(), m, d, o1.data());
        expect_close(o0, o1, 1e-13);
        for (double x : o1) EXPECT_GE(x, 0.0);
      }
}

TEST_F(KernelEquivalence, DotAndAxpy) {
  Rng rng(4);
  for (std::size_t n : kSizes) {
    auto x = random_vector(n, rng), y = random_vector(n, rng);
    EXPECT_NEAR(s.dot(x.data(), y.data(), n), v().dot(x.data(), y.data(), n), 1e-13);
    auto y0 = y, y1 = y;
    s.axpy(0.37, x.data(), y0.data(), n);
    v().axpy(0.37, x.data(), y1.data(), n);
    expect_close(y0, y1, 1e-15);
  }
}

TEST(KernelReference, ScalarGemmMatchesNaiveLoop) {
  Rng rng(5);
  const std::size_t n = 4, k = 5, m = 3;
  auto a = random_vector(n * k, rng), b = random_vector(k * m, rng);
  std::vector<double> c(n * m, 1.0);
  table(Backend::scalar).gemm_nn(a.data(), b.data(), c.data(), n, k, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double expect = 1.0;
      for (std::size_t q = 0; q < k; ++q) expect += a[i * k + q] * b[q * m + j];
      EXPECT_NEAR(c[i * m + j], expect, 1e-14);
    }
}

TEST(KernelDispatch, ScopedBackendRestoresPrevious) {
  const Backend before = active_backend();
  {
    ScopedBackend guard(Backend::scalar);
    EXPECT_EQ(active_backend(), Backend::scalar);
    EXPECT_EQ(&active(), &table(Backend::scalar));
  }
  EXPECT_EQ(active_backend(), before);
  EXPECT_EQ(backend_name(Backend::scalar), "scalar");
}

TEST(KernelDispatch, UnavailableBackendIsRejected) {
  if (backend_available(Backend::avx2)) GTEST_SKIP() << "AVX2 present";
  EXPECT_THROW(select_backend(Backend::avx2), meshssm::Error);
}
