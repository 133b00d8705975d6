#pragma once

#include "mpaud/array.hpp"
#include "mpaud/channel.hpp"
#include "mpaud/combiner.hpp"
#include "mpaud/config.hpp"
#include "mpaud/detect.hpp"
#include "mpaud/harness.hpp"
#include "mpaud/io.hpp"
#include "mpaud/pilots.hpp"
#include "mpaud/rng.hpp"
#include "mpaud/sensing.hpp"
#include "mpaud/solver.hpp"
#include "mpaud/somp.hpp"
