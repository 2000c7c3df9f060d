#pragma once

// Umbrella header: delay-embedding decompositions (SSA / NLSA), harmonic
// classification, seasonal-cycle construction, and data-quality metrics for
// daily environmental time series.

#include "fluxharm/embedding.hpp"
#include "fluxharm/errors.hpp"
#include "fluxharm/ingest.hpp"
#include "fluxharm/linalg.hpp"
#include "fluxharm/metrics.hpp"
#include "fluxharm/nlsa.hpp"
#include "fluxharm/pipeline.hpp"
#include "fluxharm/rng.hpp"
#include "fluxharm/series.hpp"
#include "fluxharm/spectral.hpp"
#include "fluxharm/ssa.hpp"
#include "fluxharm/synth.hpp"
