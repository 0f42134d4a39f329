#include <doctest.h>

#include "metaoed/errors.hpp"
#include "metaoed/stats.hpp"

using namespace metaoed;

TEST_CASE("average ranks share ties") {
  const auto r = average_ranks({10, 20, 20, 30, 5});
  const std::vector<double> expected = {2, 3.5, 3.5, 5, 1};
  CHECK(r == expected);
}

TEST_CASE("spearman correlation against reference values") {
  // reference values from an external statistics package
  const Correlation c = spearman({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {2, 1, 4, 3, 7, 5, 6, 10, 8, 9});
  CHECK(c.rho == doctest::Approx(0.9030303030303028).epsilon(1e-12));
  CHECK(c.p_value == doctest::Approx(0.00034361219776328223).epsilon(1e-8));
  CHECK(c.n == 10);
  const Correlation neg = spearman({1, 2, 3, 4}, {4, 3, 2, 1});
  CHECK(neg.rho == doctest::Approx(-1.0));
  CHECK_THROWS(spearman({1, 2}, {1, 2, 3}));
}

TEST_CASE("percentile uses linear interpolation") {
  CHECK(percentile({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
  CHECK(percentile({5, 1, 9, 3, 7}, 0.9) == doctest::Approx(8.2));
  CHECK(percentile({3}, 0.5) == 3);
}
