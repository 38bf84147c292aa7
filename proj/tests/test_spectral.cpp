#include <catch2/catch_amalgamated.hpp>

TEST_CASE("placeholder", "[spectral]") { FAIL("suite not yet written"); }
