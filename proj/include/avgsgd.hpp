#pragma once

#include "avgsgd/baselines.hpp"
#include "avgsgd/constants.hpp"
#include "avgsgd/core.hpp"
#include "avgsgd/data.hpp"
#include "avgsgd/harness.hpp"
#include "avgsgd/lms.hpp"
#include "avgsgd/losses.hpp"
#include "avgsgd/newton.hpp"
#include "avgsgd/rng.hpp"
