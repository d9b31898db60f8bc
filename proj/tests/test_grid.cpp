#include <catch2/catch_amalgamated.hpp>

#include "ctpe/time_grid.hpp"

using namespace ctpe;

TEST_CASE("grid construction") {
    TimeGrid g = make_grid(1.0, 0.1);
    CHECK(g.count == 10);
    CHECK(g.time(3) == Catch::Approx(0.3).margin(1e-15));
    CHECK(g.time(g.count) == g.horizon);

    TimeGrid g2 = make_grid(2.0, 0.5);
    CHECK(g2.count == 4);

    TimeGrid g3 = make_grid(0.9, 0.3);  // quotient only float-close to 3
    CHECK(g3.count == 3);
}

TEST_CASE("grid rejects non-integral horizon") {
    CHECK_THROWS_WITH(make_grid(1.0, 0.3), Catch::Matchers::ContainsSubstring("not integral"));
    CHECK_THROWS(make_grid(-1.0, 0.1));
    CHECK_THROWS(make_grid(1.0, 0.0));
}

TEST_CASE("grid times strictly increasing") {
    TimeGrid g = make_grid(1.0, 0.05);
    for (int n = 0; n < g.count; ++n) CHECK(g.time(n) < g.time(n + 1));
}
