#include <catch2/catch_amalgamated.hpp>

TEST_CASE("placeholder", "[cli]") { FAIL("suite not yet written"); }
