#pragma once

// Umbrella header: cut-point detection for right-censored survival data via
// cumulative binarization and weighted L1-penalized Cox regression, the
// sparsifying two-stage variant, limited-cut-point procedures, evaluation
// metrics, and seeded simulation benchmarks.

#include "binilasso/binarize.hpp"
#include "binilasso/cox.hpp"
#include "binilasso/design.hpp"
#include "binilasso/errors.hpp"
#include "binilasso/manifest.hpp"
#include "binilasso/metrics.hpp"
#include "binilasso/parallel.hpp"
#include "binilasso/pipelines.hpp"
#include "binilasso/rng.hpp"
#include "binilasso/simulate.hpp"
#include "binilasso/solver.hpp"
#include "binilasso/survival_data.hpp"
#include "binilasso/unilasso.hpp"
