#include <doctest.h>

#include <algorithm>
#include <set>

#include "murmur/error.hpp"
#include "murmur/metrics.hpp"
#include "murmur/random.hpp"
#include "oracles.hpp"

using namespace murmur;

TEST_CASE("binary metrics examples") {
  const std::vector<int> pred{1, 1, 0, 0}, truth{1, 0, 1, 0};
  const auto m = binary_metrics(pred, truth);
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.fn == 1);
  CHECK(m.tn == 1);
  CHECK(m.accuracy == 0.5);
  CHECK(m.f1 == 0.5);

  const auto c = metrics_from_counts(79, 19, 874, 20);
  CHECK(c.precision == doctest::Approx(79.0 / 98).epsilon(1e-12));
  CHECK(c.recall == doctest::Approx(79.0 / 99).epsilon(1e-12));
  CHECK(c.accuracy == doctest::Approx(953.0 / 992).epsilon(1e-12));
  CHECK(c.f1 == doctest::Approx(2 * 79.0 / (2 * 79 + 19 + 20)).epsilon(1e-12));

  const auto z = metrics_from_counts(0, 0, 5, 0);
  CHECK(z.precision == 0);
  CHECK(z.recall == 0);
  CHECK(z.f1 == 0);
  CHECK(z.accuracy == 1);

  CHECK_THROWS_AS(binary_metrics(std::vector<int>{1}, std::vector<int>{1, 0}), Error);
}

TEST_CASE("metrics stay in [0,1] and f1 is the harmonic mean") {
  Rng rng(5);
  for (int it = 0; it < 500; ++it) {
    const auto n = 1 + uniform_index(rng, 40);
    std::vector<int> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<int>(uniform_index(rng, 2));
      t[i] = static_cast<int>(uniform_index(rng, 2));
    }
    const auto m = binary_metrics(p, t);
    CHECK(m.tp + m.fp + m.tn + m.fn == static_cast<std::int64_t>(n));
    for (double v : {m.accuracy, m.precision, m.recall, m.f1}) {
      CHECK(v >= 0);
      CHECK(v <= 1);
    }
    if (m.precision + m.recall > 0)
      CHECK(m.f1 == doctest::Approx(2 * m.precision * m.recall / (m.precision + m.recall)));
  }
}

TEST_CASE("patient_kfold") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("p" + std::to_string(i));
  const auto f = patient_kfold(ids, 5, 0);
  for (int k = 0; k < 5; ++k) CHECK(f.patients_in(k).size() == 2);
  CHECK(f.fold_of.size() == 10);

  std::vector<std::string> many;
  for (int i = 0; i < 874; ++i) many.push_back(std::to_string(50000 + i));
  const auto g = patient_kfold(many, 5, 7);
  std::vector<std::size_t> sizes;
  for (int k = 0; k < 5; ++k) sizes.push_back(g.patients_in(k).size());
  std::sort(sizes.begin(), sizes.end());
  CHECK(sizes == std::vector<std::size_t>{174, 175, 175, 175, 175});

  // Deterministic and independent of input order or duplicates.
  auto shuffled = many;
  Rng rng(3);
  murmur::shuffle(shuffled.begin(), shuffled.end(), rng);
  shuffled.push_back(many.front());
  CHECK(patient_kfold(shuffled, 5, 7).fold_of == g.fold_of);
  CHECK(patient_kfold(many, 5, 8).fold_of != g.fold_of);

  CHECK_THROWS_AS(patient_kfold(ids, 1, 0), Error);
  CHECK_THROWS_AS(patient_kfold({"a", "b"}, 3, 0), Error);
}

TEST_CASE("mann_whitney examples") {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  const auto r = mann_whitney_u(a, b);
  CHECK(r.exact);
  CHECK(r.u == 0);
  CHECK(r.u_b == 9);
  CHECK(r.p_two_sided == doctest::Approx(0.1).epsilon(1e-9));

  const auto same = mann_whitney_u(a, a);
  CHECK(same.p_two_sided >= 0.9);

  const std::vector<double> ties(5, 0.5);
  CHECK(mann_whitney_u(ties, ties).p_two_sided == doctest::Approx(1.0));

  CHECK_THROWS_AS(mann_whitney_u(std::vector<double>{}, a), Error);
}

TEST_CASE("exact p matches the recursion oracle for tie-free samples") {
  Rng rng(11);
  for (int na = 1; na <= 6; ++na)
    for (int nb = 1; nb <= 6; ++nb)
      for (int rep = 0; rep < 5; ++rep) {
        std::vector<double> pool(static_cast<std::size_t>(na + nb));
        for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<double>(i);
        murmur::shuffle(pool.begin(), pool.end(), rng);
        const std::vector<double> a(pool.begin(), pool.begin() + na), b(pool.begin() + na, pool.end());
        const auto r = mann_whitney_exact(a, b);
        CHECK(r.u == oracle::u_pairs(a, b));
        CHECK(r.p_two_sided == doctest::Approx(oracle::exact_p(r.u, na, nb)).epsilon(1e-9));
      }
}

TEST_CASE("mann_whitney properties") {
  Rng rng(13);
  for (int it = 0; it < 200; ++it) {
    const auto na = 1 + uniform_index(rng, 15), nb = 1 + uniform_index(rng, 15);
    std::vector<double> a(na), b(nb);
    // Coarse values so ties occur.
    for (auto& x : a) x = static_cast<double>(uniform_index(rng, 6));
    for (auto& x : b) x = static_cast<double>(uniform_index(rng, 6));
    const auto ab = mann_whitney_u(a, b), ba = mann_whitney_u(b, a);
    CHECK(ab.u + ab.u_b == doctest::Approx(static_cast<double>(na * nb)));
    CHECK(ab.u == doctest::Approx(oracle::u_pairs(a, b)));
    CHECK(ab.u == doctest::Approx(ba.u_b));
    CHECK(ab.p_two_sided == doctest::Approx(ba.p_two_sided));
    CHECK(ab.p_two_sided >= 0);
    CHECK(ab.p_two_sided <= 1);
  }
}

TEST_CASE("exact and normal branches agree for moderate sizes") {
  Rng rng(17);
  for (int n = 6; n <= 8; ++n)
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
      for (auto& x : a) x = gaussian(rng);
      for (auto& x : b) x = gaussian(rng) + 0.5;
      CHECK(std::fabs(mann_whitney_exact(a, b).p_two_sided - mann_whitney_normal(a, b).p_two_sided) <= 0.02);
    }
}

TEST_CASE("mean_std") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  const auto m = mean_std(v);
  CHECK(m.mean == 5);
  CHECK(m.std == doctest::Approx(std::sqrt(32.0 / 7)));
  CHECK(mean_std(std::vector<double>{3}).std == 0);
}
