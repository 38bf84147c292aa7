#include <catch2/catch_amalgamated.hpp>

TEST_CASE("placeholder", "[param_poly]") { FAIL("suite not yet written"); }
