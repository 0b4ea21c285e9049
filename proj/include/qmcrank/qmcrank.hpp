#pragma once

// Umbrella header: the whole library.

#include "qmcrank/dataio.hpp"
#include "qmcrank/estimators.hpp"
#include "qmcrank/gumbel_pl.hpp"
#include "qmcrank/lowdisc.hpp"
#include "qmcrank/metrics.hpp"
#include "qmcrank/propensity.hpp"
#include "qmcrank/scorer.hpp"
#include "qmcrank/stats.hpp"
