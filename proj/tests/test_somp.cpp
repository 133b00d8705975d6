#include <catch2/catch_amalgamated.hpp>
#include "mpaud/mpaud.hpp"
