#include "doctest.h"

#include "hra/stats.hpp"

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <cmath>

using namespace hra;

TEST_CASE("F upper tail against Boost") {
    for (double d1 : {1.0, 2.0, 5.0, 15.0, 39.0}) {
        for (double d2 : {1.0, 3.0, 5.0, 44.0, 120.0}) {
            const boost::math::fisher_f_distribution<double> dist(d1, d2);
            for (double f : {0.01, 0.1, 0.38, 1.0, 2.5, 4.65, 8.04, 18.03, 60.0}) {
                const double expected = boost::math::cdf(boost::math::complement(dist, f));
                CHECK(stats::f_upper_tail(f, d1, d2) == doctest::Approx(expected).epsilon(1e-10));
            }
        }
    }
    CHECK(stats::f_upper_tail(0.0, 3, 4) == 1.0);
    CHECK(stats::f_upper_tail(-2.0, 3, 4) == 1.0);
    CHECK(stats::f_upper_tail(std::numeric_limits<double>::infinity(), 3, 4) == 0.0);
}

TEST_CASE("incomplete beta against Boost") {
    for (double a : {0.5, 1.0, 2.5, 22.0}) {
        for (double b : {0.5, 3.0, 7.5}) {
            for (double x : {0.0, 0.05, 0.3, 0.5, 0.77, 0.99, 1.0}) {
                CHECK(stats::incomplete_beta(a, b, x) ==
                      doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-11));
            }
        }
    }
}

TEST_CASE("normal quantile and CDF against Boost") {
    const boost::math::normal_distribution<double> n01;
    for (double p : {1e-10, 1e-4, 0.01, 0.0227, 0.2, 0.5, 0.66, 0.975, 0.9999}) {
        CHECK(stats::normal_quantile(p) == doctest::Approx(boost::math::quantile(n01, p)).epsilon(1e-9));
    }
    for (double x : {-6.0, -1.3, 0.0, 0.4, 2.2}) {
        CHECK(stats::normal_cdf(x) == doctest::Approx(boost::math::cdf(n01, x)).epsilon(1e-12));
    }
}
