#pragma once

// Everything, for programs that do not care about compile time.

#include "ilicast/version.hpp"

#include "ilicast/core/alloc.hpp"
#include "ilicast/core/errors.hpp"
#include "ilicast/core/log.hpp"
#include "ilicast/core/optimize.hpp"
#include "ilicast/core/stats.hpp"

#include "ilicast/nn/gradcheck.hpp"
#include "ilicast/nn/layers.hpp"
#include "ilicast/nn/tape.hpp"

#include "ilicast/bayes/bayes_layer.hpp"

#include "ilicast/train/losses.hpp"
#include "ilicast/train/optim.hpp"
#include "ilicast/train/trainer.hpp"

#include "ilicast/data/csv.hpp"
#include "ilicast/data/date.hpp"
#include "ilicast/data/prep.hpp"
#include "ilicast/data/series.hpp"
#include "ilicast/data/synthetic.hpp"
#include "ilicast/data/transforms.hpp"
#include "ilicast/data/windows.hpp"

#include "ilicast/forecast/baselines.hpp"
#include "ilicast/forecast/checkpoint.hpp"
#include "ilicast/forecast/gp.hpp"
#include "ilicast/forecast/neural.hpp"
#include "ilicast/forecast/spec.hpp"
#include "ilicast/forecast/uncertainty.hpp"

#include "ilicast/metrics/calibration.hpp"
#include "ilicast/metrics/metrics.hpp"
#include "ilicast/metrics/report.hpp"
#include "ilicast/metrics/significance.hpp"

#include "ilicast/harness/artifacts.hpp"
#include "ilicast/harness/config.hpp"
#include "ilicast/harness/experiment.hpp"
#include "ilicast/harness/tables.hpp"
