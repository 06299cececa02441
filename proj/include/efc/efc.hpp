#pragma once

// Umbrella header for the energy-based flow classifier library.

#include "efc/classifier.hpp"
#include "efc/csv.hpp"
#include "efc/error.hpp"
#include "efc/evaluation.hpp"
#include "efc/frequencies.hpp"
#include "efc/metrics.hpp"
#include "efc/model_io.hpp"
#include "efc/potts.hpp"
#include "efc/preprocess.hpp"
#include "efc/report.hpp"
#include "efc/rng.hpp"
#include "efc/schema.hpp"
#include "efc/synthesis.hpp"
#include "efc/table.hpp"
#include "efc/version.hpp"
