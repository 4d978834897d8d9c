/// Umbrella header for the full library.
#pragma once

#include "dibs/bge.hpp"
#include "dibs/bn_models.hpp"
#include "dibs/estimators.hpp"
#include "dibs/graph.hpp"
#include "dibs/io.hpp"
#include "dibs/latent.hpp"
#include "dibs/logsumexp.hpp"
#include "dibs/mcmc.hpp"
#include "dibs/metrics.hpp"
#include "dibs/parallel.hpp"
#include "dibs/random.hpp"
#include "dibs/svgd.hpp"
#include "dibs/synthetic.hpp"
#include "dibs/version.hpp"
