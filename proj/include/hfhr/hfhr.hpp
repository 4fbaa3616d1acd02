#pragma once

#include "hfhr/analysis.hpp"
#include "hfhr/experiment.hpp"
#include "hfhr/gaussian.hpp"
#include "hfhr/io.hpp"
#include "hfhr/metrics.hpp"
#include "hfhr/potential.hpp"
#include "hfhr/random.hpp"
#include "hfhr/reference.hpp"
#include "hfhr/samplers.hpp"
#include "hfhr/spectral.hpp"
