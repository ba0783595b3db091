#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dan/kernels.hpp"
#include "dan/matrix.hpp"
#include "dan/parallel.hpp"
#include "dan/rng.hpp"

#include <cmath>
#include <cstring>
#include <vector>

using dan::Matrix;
namespace k = dan::kernels;

namespace {

std::vector<double> random_vec(dan::Rng& rng, std::size_t n, double lo = -1.0,
                               double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.next_double(lo, hi);
    return v;
}

Matrix random_matrix(dan::Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.next_double(-1.0, 1.0);
    return m;
}

Matrix naive_gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t kk,
                  double alpha, const Matrix& a, const Matrix& b, double beta,
                  Matrix c) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < kk; ++l) {
                const double av = ta ? a(l, i) : a(i, l);
                const double bv = tb ? b(j, l) : b(l, j);
                s += av * bv;
            }
            c(i, j) = alpha * s + beta * c(i, j);
        }
    return c;
}

struct BackendGuard {
    k::Backend saved;
    BackendGuard() : saved(k::active()) {}
    ~BackendGuard() { k::force(saved); }
};

}  // namespace

TEST_CASE("level-1 kernels agree across backends") {
    if (!k::supported(k::Backend::avx2)) return;  // nothing to compare on this CPU
    BackendGuard guard;
    dan::Rng rng(7);
    // Sizes straddling every unroll width and remainder path.
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 15u, 16u, 17u, 64u, 1000u, 1003u}) {
        std::vector<double> x = random_vec(rng, n), y = random_vec(rng, n);

        k::force(k::Backend::scalar);
        const double dot_s = k::dot(x.data(), y.data(), n);
        const double ss_s = k::sum_sq(x.data(), n);
        std::vector<double> ax_s = y;
        k::axpy(0.37, x.data(), ax_s.data(), n);
        std::vector<double> r_s(n);
        k::relu(x.data(), r_s.data(), n);
        std::vector<double> gx_s = x, gy_s = y;
        k::givens(gx_s.data(), gy_s.data(), 0.8, 0.6, n);

        k::force(k::Backend::avx2);
        const double dot_v = k::dot(x.data(), y.data(), n);
        const double ss_v = k::sum_sq(x.data(), n);
        std::vector<double> ax_v = y;
        k::axpy(0.37, x.data(), ax_v.data(), n);
        std::vector<double> r_v(n);
        k::relu(x.data(), r_v.data(), n);
        std::vector<double> gx_v = x, gy_v = y;
        k::givens(gx_v.data(), gy_v.data(), 0.8, 0.6, n);

        const double tol = 1e-12 * (static_cast<double>(n) + 1.0);
        CHECK(std::fabs(dot_s - dot_v) <= tol);
        CHECK(std::fabs(ss_s - ss_v) <= tol);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(ax_s[i] == doctest::Approx(ax_v[i]).epsilon(1e-14));
            CHECK(r_s[i] == r_v[i]);  // max() is exact in both
            CHECK(gx_s[i] == doctest::Approx(gx_v[i]).epsilon(1e-14));
            CHECK(gy_s[i] == doctest::Approx(gy_v[i]).epsilon(1e-14));
        }
    }
}

TEST_CASE("gemm matches the naive triple loop") {
    dan::Rng rng(11);
    for (auto [m, n, kk] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1},
                            {2, 3, 4},
                            {5, 8, 13},
                            {6, 8, 384},
                            {7, 9, 385},
                            {13, 17, 40},
                            {73, 65, 129},
                            {128, 96, 64}}) {
        for (bool ta : {false, true}) {
            for (bool tb : {false, true}) {
                Matrix a = ta ? random_matrix(rng, kk, m) : random_matrix(rng, m, kk);
                Matrix b = tb ? random_matrix(rng, n, kk) : random_matrix(rng, kk, n);
                Matrix c0 = random_matrix(rng, m, n);

                Matrix want = naive_gemm(ta, tb, m, n, kk, 1.3, a, b, 0.7, c0);
                Matrix got = c0;
                k::gemm(ta, tb, m, n, kk, 1.3, a.data(), a.cols(), b.data(), b.cols(),
                        0.7, got.data(), got.cols());
                CHECK(dan::max_abs_diff(want, got) <=
                      1e-12 * (static_cast<double>(kk) + 1.0));
            }
        }
    }
}

TEST_CASE("gemm beta = 0 overwrites, alpha = 0 leaves beta*C") {
    dan::Rng rng(3);
    Matrix a = random_matrix(rng, 9, 7), b = random_matrix(rng, 7, 5);
    Matrix c = random_matrix(rng, 9, 5);
    Matrix c2 = c;
    k::gemm(false, false, 9, 5, 7, 0.0, a.data(), 7, b.data(), 5, 0.5, c2.data(), 5);
    for (std::size_t i = 0; i < c.size(); ++i)
        CHECK(c2.data()[i] == doctest::Approx(0.5 * c.data()[i]));
}

TEST_CASE("syrk_lower fills the lower triangle of A A^T and A^T A") {
    dan::Rng rng(5);
    for (auto [n, kk] :
         {std::pair<std::size_t, std::size_t>{1, 4}, {5, 3}, {17, 29}, {40, 11}}) {
        Matrix a = random_matrix(rng, n, kk);

        Matrix full(n, n);
        k::gemm(false, true, n, n, kk, 1.0, a.data(), kk, a.data(), kk, 0.0, full.data(),
                n);
        Matrix low(n, n);
        low.fill(7.5);  // upper entries must stay untouched
        k::syrk_lower(false, n, kk, 1.0, a.data(), kk, 0.0, low.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (j <= i)
                    CHECK(low(i, j) == doctest::Approx(full(i, j)).epsilon(1e-12));
                else
                    CHECK(low(i, j) == 7.5);
            }

        Matrix fullt(kk, kk);
        k::gemm(true, false, kk, kk, n, 1.0, a.data(), kk, a.data(), kk, 0.0,
                fullt.data(), kk);
        Matrix lowt(kk, kk);
        k::syrk_lower(true, kk, n, 1.0, a.data(), kk, 0.0, lowt.data(), kk);
        for (std::size_t i = 0; i < kk; ++i)
            for (std::size_t j = 0; j <= i; ++j)
                CHECK(lowt(i, j) == doctest::Approx(fullt(i, j)).epsilon(1e-12));
    }
}

TEST_CASE("gemm is bit-identical for any thread count") {
    dan::Rng rng(23);
    Matrix a = random_matrix(rng, 137, 211), b = random_matrix(rng, 211, 149);
    Matrix c1(137, 149), c4(137, 149);

    dan::set_thread_count(1);
    k::gemm(false, false, 137, 149, 211, 1.0, a.data(), 211, b.data(), 149, 0.0,
            c1.data(), 149);
    dan::set_thread_count(4);
    k::gemm(false, false, 137, 149, 211, 1.0, a.data(), 211, b.data(), 149, 0.0,
            c4.data(), 149);
    dan::set_thread_count(0);

    CHECK(std::memcmp(c1.data(), c4.data(), c1.size() * sizeof(double)) == 0);
}

TEST_CASE("scalar and avx2 gemm agree within rounding") {
    if (!k::supported(k::Backend::avx2)) return;
    BackendGuard guard;
    dan::Rng rng(31);
    Matrix a = random_matrix(rng, 45, 391), b = random_matrix(rng, 391, 33);
    Matrix cs(45, 33), cv(45, 33);
    k::force(k::Backend::scalar);
    k::gemm(false, false, 45, 33, 391, 1.0, a.data(), 391, b.data(), 33, 0.0, cs.data(),
            33);
    k::force(k::Backend::avx2);
    k::gemm(false, false, 45, 33, 391, 1.0, a.data(), 391, b.data(), 33, 0.0, cv.data(),
            33);
    CHECK(dan::max_abs_diff(cs, cv) <= 1e-11);
}

TEST_CASE("backend forcing rejects unsupported targets") {
    CHECK(k::supported(k::Backend::scalar));
    CHECK_NOTHROW(k::force(k::Backend::scalar));
    if (k::supported(k::Backend::avx2)) {
        CHECK_NOTHROW(k::force(k::Backend::avx2));
        CHECK(k::active() == k::Backend::avx2);
    }
}
