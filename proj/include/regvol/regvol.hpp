#pragma once

// Umbrella header: subset selection for regularized A-optimal design by
// proportional volume sampling, with exhaustive-enumeration oracles and the
// ridge-regression error layer.

#include "regvol/errors.hpp"
#include "regvol/instance.hpp"
#include "regvol/io.hpp"
#include "regvol/oracle.hpp"
#include "regvol/pipeline.hpp"
#include "regvol/relaxation.hpp"
#include "regvol/ridge.hpp"
#include "regvol/rng.hpp"
#include "regvol/sampler.hpp"
#include "regvol/scaled.hpp"
#include "regvol/symfun.hpp"
